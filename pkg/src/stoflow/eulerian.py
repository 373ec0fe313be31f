"""Eulerian velocity-field SDEs: stochastic Euler and the averaged
Euler-alpha model, wrapped as finite SDE problems over stacked real
Fourier coefficients.

    du = -Pi[(u.grad)u] dt + dW                      (plain Euler)
    du = -Pi H^-1[(u.grad)m + a^2 (grad u)^T Lap u] dt + H^-1 dW
         with m = H u,  H = id - a^2 Lap             (averaged, alpha = a)

Both drifts and the noise are divergence-free, so the solution stays
divergence-free at every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import spectral as sp
from .qwiener import QWienerSpec, eigenmode_field, sample_coefficients
from .sde import SdeProblem, solve_path
from .spectral import SpectralField

__all__ = [
    "euler_drift",
    "averaged_drift",
    "noise_mode_multiplier",
    "pack_field",
    "unpack_field",
    "make_eulerian_problem",
    "EulerianPath",
    "run_eulerian",
]

LOCALIZATION_SOBOLEV_INDEX = 2.0  # H^s norm used for the exit ball


def euler_drift(u: SpectralField, forcing: Optional[SpectralField] = None) -> SpectralField:
    """-Pi[(u.grad)u] (+ Pi f when forcing is given)."""
    out = -1.0 * sp.leray_project(sp.advection_term(u))
    if forcing is not None:
        out = out + sp.leray_project(forcing)
    return out


def averaged_drift(u: SpectralField, alpha: float,
                   smooth_first: bool = False) -> SpectralField:
    """Averaged Euler-alpha drift; alpha = 0 recovers the plain Euler drift.

    The Helmholtz inverse and the Leray projection are both Fourier
    multipliers on divergence-free parts, so the two application orders
    agree to rounding; the default projects first.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    m = sp.helmholtz_apply(u, alpha)
    raw = sp.directional_derivative(u, m) + alpha**2 * sp.grad_transpose_laplacian(u)
    if smooth_first:
        return -1.0 * sp.leray_project(sp.helmholtz_inverse(raw, alpha))
    return -1.0 * sp.helmholtz_inverse(sp.leray_project(raw), alpha)


def noise_mode_multiplier(spec: QWienerSpec, alpha: float) -> np.ndarray:
    """Per-noise-coordinate factor 1/(1 + alpha^2 |k|^2); identity at alpha=0."""
    ksq = np.sum(spec.wavevectors.astype(float) ** 2, axis=1)
    return np.repeat(1.0 / (1.0 + alpha**2 * ksq), 2)


# ---------------------------------------------------------------------------
# packing fields into flat real state vectors

def pack_field(u: SpectralField) -> np.ndarray:
    c = u.coeffs.ravel()
    return np.concatenate([c.real, c.imag])


def unpack_field(x: np.ndarray, N: int) -> SpectralField:
    M = 2 * N + 1
    half = 2 * M * M
    c = (x[:half] + 1j * x[half:]).reshape(2, M, M)
    return SpectralField(N, c)


def _diffusion_matrix(spec: QWienerSpec, N: int, alpha: float) -> np.ndarray:
    cols = []
    mult = noise_mode_multiplier(spec, alpha)
    for j in range(spec.n_modes):
        cols.append(mult[j] * pack_field(eigenmode_field(spec, j)))
    return np.array(cols).T


def make_eulerian_problem(u0: SpectralField, spec: QWienerSpec, alpha: float = 0.0,
                          radius_factor: float = 10.0,
                          forcing: Optional[SpectralField] = None) -> SdeProblem:
    """Stack coefficients into a real state vector and build the SdeProblem.

    The localization domain is the H^s ball (s fixed by
    LOCALIZATION_SOBOLEV_INDEX) of radius radius_factor * max(|u0|_{H^s}, 1)
    centered at the origin.
    """
    if spec.N != u0.N:
        raise ValueError("noise spectrum and initial field resolutions differ")
    N = u0.N
    x0 = pack_field(u0)
    if spec.trace == 0.0:
        # silent noise: zero-width diffusion, no per-step matvec cost
        sigma_mat = np.zeros((len(x0), 0))
        variances = np.zeros(0)
    else:
        sigma_mat = _diffusion_matrix(spec, N, alpha)
        variances = spec.mode_variances

    def drift(t: float, x: np.ndarray) -> np.ndarray:
        u = unpack_field(x, N)
        if alpha == 0.0:
            du = euler_drift(u, forcing)
        else:
            du = averaged_drift(u, alpha)
            if forcing is not None:
                du = du + sp.helmholtz_inverse(sp.leray_project(forcing), alpha)
        return pack_field(du)

    def sigma(x: np.ndarray) -> np.ndarray:
        return sigma_mat

    def hs_norm(x: np.ndarray) -> float:
        return sp.sobolev_norm(unpack_field(x, N), LOCALIZATION_SOBOLEV_INDEX)

    radius = radius_factor * max(sp.sobolev_norm(u0, LOCALIZATION_SOBOLEV_INDEX), 1.0)
    return SdeProblem(dim=len(x0), drift=drift, sigma=sigma,
                      noise_variances=variances, x0=x0,
                      domain_radius=radius, domain_norm=hs_norm)


@dataclass
class EulerianPath:
    """One trajectory of the Eulerian SDE with per-step diagnostics."""

    times: np.ndarray
    fields: list
    increments: np.ndarray  # raw noise coordinates per step (pre-multiplier)
    energy: np.ndarray      # |u|_{L2}^2
    enstrophy: np.ndarray
    hs_norm: np.ndarray
    div_residual: np.ndarray
    exited: bool
    exit_time: Optional[float]

    @property
    def terminal(self) -> SpectralField:
        return self.fields[-1]


def run_eulerian(u0: SpectralField, spec: QWienerSpec, dt: float, T: float,
                 scheme: str = "heun", alpha: float = 0.0,
                 rng: Optional[np.random.Generator] = None,
                 increments: Optional[np.ndarray] = None,
                 radius_factor: float = 10.0,
                 forcing: Optional[SpectralField] = None,
                 keep_fields: bool = True) -> EulerianPath:
    """Integrate the velocity-field SDE and collect diagnostics.

    `increments` are raw Q-Wiener coordinates (before any alpha smoothing);
    when absent they are drawn from `rng`.  The same increments drive both
    the plain and the averaged model in coupled experiments.
    """
    nsteps = int(round(T / dt))
    t_grid = np.linspace(0.0, nsteps * dt, nsteps + 1)
    problem = make_eulerian_problem(u0, spec, alpha=alpha,
                                    radius_factor=radius_factor, forcing=forcing)
    if increments is None:
        if rng is not None:
            increments = sample_coefficients(spec, dt, nsteps, rng)
        elif spec.trace == 0.0:
            increments = np.zeros((nsteps, spec.n_modes))
        else:
            raise ValueError("need an rng stream or explicit increments")
    solver_inc = increments if spec.trace > 0.0 else increments[:, :0]
    res = solve_path(problem, scheme, t_grid, increments=solver_inc)

    fields = [unpack_field(x, u0.N) for x in res.states]
    energy = np.array([sp.l2_norm(f) ** 2 for f in fields])
    ens = np.array([sp.enstrophy(f) for f in fields])
    hs = np.array([sp.sobolev_norm(f, LOCALIZATION_SOBOLEV_INDEX) for f in fields])
    div = np.array([sp.divergence_residual(f) for f in fields])
    return EulerianPath(times=res.times, fields=fields if keep_fields else [fields[-1]],
                        increments=increments[: len(res.times) - 1],
                        energy=energy, enstrophy=ens, hs_norm=hs, div_residual=div,
                        exited=res.exited, exit_time=res.exit_time)
