"""Finite-dimensional SDE engine: Ito / Stratonovich steppers, the
Ito-Stratonovich drift correction, exit-time localization, and strong
convergence-order estimation.

Noise is a vector of independent Gaussian coordinates with per-coordinate
variances (the diagonal of Q in its eigenbasis); an increment over dt has
coordinate j distributed N(0, lambda_j dt).  The diffusion sigma(x) is a
(dim x n_noise) matrix mapping noise coordinates into state space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "SdeProblem",
    "PathResult",
    "SdePathError",
    "step_euler_maruyama",
    "step_heun_stratonovich",
    "stratonovich_correction",
    "sample_increments",
    "solve_path",
    "coarsen_increments",
    "strong_convergence_order",
]


class SdePathError(RuntimeError):
    """A path produced non-finite state; carries the offending step index."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state at step {step}, t={t}")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class SdeProblem:
    """dX = b(t, X) dt + sigma(X) dW on a localization ball U.

    U is the closed ball of radius `domain_radius` about `domain_center`
    in the norm `domain_norm` (Euclidean when None); paths are certified
    only up to the first grid time they leave U.
    """

    dim: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], np.ndarray]
    noise_variances: np.ndarray
    x0: np.ndarray
    domain_radius: float = np.inf
    domain_center: Optional[np.ndarray] = None
    domain_norm: Optional[Callable[[np.ndarray], float]] = None

    def distance_from_center(self, x: np.ndarray) -> float:
        c = self.domain_center if self.domain_center is not None else 0.0
        d = x - c
        if self.domain_norm is not None:
            return float(self.domain_norm(d))
        return float(np.linalg.norm(d))


@dataclass
class PathResult:
    """Time grid and states up to (and including) the exit-time state."""

    times: np.ndarray
    states: np.ndarray
    exited: bool
    exit_time: Optional[float]
    exit_index: Optional[int]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


def step_euler_maruyama(problem: SdeProblem, t: float, x: np.ndarray,
                        dW: np.ndarray, dt: float) -> np.ndarray:
    """x + b(t,x) dt + sigma(x) dW."""
    return x + problem.drift(t, x) * dt + problem.sigma(x) @ dW


def step_heun_stratonovich(problem: SdeProblem, t: float, x: np.ndarray,
                           dW: np.ndarray, dt: float) -> np.ndarray:
    """Predictor-corrector (Heun) step targeting the Stratonovich solution.

    Predictor: xp = x + b(t,x) dt + sigma(x) dW
    Corrector: x + (b(t,x) + b(t+dt,xp))/2 dt + (sigma(x) + sigma(xp))/2 dW

    Reduces to second-order Heun for the ODE when the noise is off.
    """
    b0 = problem.drift(t, x)
    s0 = problem.sigma(x)
    xp = x + b0 * dt + s0 @ dW
    b1 = problem.drift(t + dt, xp)
    s1 = problem.sigma(xp)
    if s1 is s0:  # state-independent diffusion: corrector average degenerates
        noise = s0 @ dW
    else:
        noise = 0.5 * (s0 @ dW + s1 @ dW)
    return x + 0.5 * (b0 + b1) * dt + noise


_STEPPERS = {
    "euler-maruyama": step_euler_maruyama,
    "heun": step_heun_stratonovich,
}


def stratonovich_correction(problem: SdeProblem, x: np.ndarray,
                            h: Optional[float] = None) -> np.ndarray:
    """Drift correction (1/2) tr[sigma'(x) sigma(x) Q] by central differences.

    Converts a Stratonovich drift into the equivalent Ito drift:
    b_ito = b_strat + correction.  Works for black-box sigma.
    """
    if h is None:
        h = 1e-5 * (1.0 + float(np.linalg.norm(x)))
    lam = np.asarray(problem.noise_variances, dtype=float)
    s = problem.sigma(x)
    out = np.zeros(problem.dim)
    for j in range(len(lam)):
        if lam[j] == 0.0:
            continue
        v = s[:, j]
        if not np.any(v):
            continue
        col_plus = problem.sigma(x + h * v)[:, j]
        col_minus = problem.sigma(x - h * v)[:, j]
        out += lam[j] * (col_plus - col_minus) / (2.0 * h)
    return 0.5 * out


def sample_increments(problem: SdeProblem, t_grid: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    """Gaussian increments dW for each step of the grid, shape (nsteps, m)."""
    dts = np.diff(t_grid)
    lam = np.asarray(problem.noise_variances, dtype=float)
    xi = rng.standard_normal((len(dts), len(lam)))
    return xi * np.sqrt(lam[None, :] * dts[:, None])


def solve_path(problem: SdeProblem, scheme: str, t_grid: np.ndarray,
               rng: Optional[np.random.Generator] = None,
               increments: Optional[np.ndarray] = None) -> PathResult:
    """Integrate on the grid until the end or the first exit from U.

    Either an RNG stream or a precomputed increment array must be given;
    the output is a pure function of (problem, scheme, grid, increments).
    """
    stepper = _STEPPERS[scheme]
    t_grid = np.asarray(t_grid, dtype=float)
    nsteps = len(t_grid) - 1
    x = np.array(problem.x0, dtype=float)

    if problem.distance_from_center(x) > problem.domain_radius:
        raise ValueError("initial state outside the localization domain U")
    if increments is None:
        if rng is None:
            raise ValueError("need an rng stream or explicit increments")
        increments = sample_increments(problem, t_grid, rng)
    if increments.shape[0] != nsteps:
        raise ValueError("increment array does not match the time grid")

    states = [x.copy()]
    for i in range(nsteps):
        dt = t_grid[i + 1] - t_grid[i]
        x = stepper(problem, t_grid[i], x, increments[i], dt)
        if not np.all(np.isfinite(x)):
            raise SdePathError(i, float(t_grid[i + 1]))
        states.append(x.copy())
        if problem.distance_from_center(x) > problem.domain_radius:
            return PathResult(times=t_grid[: i + 2], states=np.array(states),
                              exited=True, exit_time=float(t_grid[i + 1]),
                              exit_index=i + 1)
    return PathResult(times=t_grid, states=np.array(states), exited=False,
                      exit_time=None, exit_index=None)


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum blocks of `factor` fine increments into coarse ones."""
    n = increments.shape[0]
    if n % factor != 0:
        raise ValueError("increment count not divisible by coarsening factor")
    return increments.reshape(n // factor, factor, -1).sum(axis=1)


def strong_convergence_order(problem: SdeProblem, scheme: str, T: float,
                             steps: Sequence[int], n_paths: int,
                             rng: np.random.Generator,
                             exact: Optional[Callable[[np.ndarray], np.ndarray]] = None):
    """Estimate the strong order from coupled-noise refinement.

    `steps` must be >= 3 step counts in increasing geometric progression;
    coarse increments are block sums of the finest ones so all levels share
    one driving path.  The reference at time T is `exact(W_T)` when given,
    otherwise the finest-grid solution.  Returns (order, dts, rms_errors).
    """
    steps = sorted(int(n) for n in steps)
    if len(steps) < 3:
        raise ValueError("need at least 3 step counts")
    finest = steps[-1]
    for n in steps:
        if finest % n != 0:
            raise ValueError("step counts must divide the finest count")

    compare = steps if exact is not None else steps[:-1]
    errs = np.zeros(len(compare))
    for _ in range(n_paths):
        grid_f = np.linspace(0.0, T, finest + 1)
        inc_f = sample_increments(problem, grid_f, rng)
        if exact is not None:
            ref = exact(inc_f.sum(axis=0))
        else:
            ref = solve_path(problem, scheme, grid_f, increments=inc_f).terminal
        for i, n in enumerate(compare):
            grid = np.linspace(0.0, T, n + 1)
            inc = coarsen_increments(inc_f, finest // n)
            sol = solve_path(problem, scheme, grid, increments=inc).terminal
            errs[i] += np.sum((sol - ref) ** 2)
    rms = np.sqrt(errs / n_paths)
    if np.any(rms == 0.0):
        raise ValueError("degenerate (zero) strong errors; cannot fit an order")
    dts = np.array([T / n for n in compare])
    order = float(np.polyfit(np.log(dts), np.log(rms), 1)[0])
    return order, dts, rms
