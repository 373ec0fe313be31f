"""Q-Wiener processes valued in divergence-free spectral fields.

The covariance operator Q is diagonal in the canonical real eigenbasis of
divergence-free torus modes: for each wavevector k in a half lattice, the
two unit fields

    sqrt(2) cos(k.x) kperp/|k|,   sqrt(2) sin(k.x) kperp/|k|

share the eigenvalue lambda_k = c (1 + |k|^2)^(-gamma).  An increment over
a step dt is sum_j sqrt(lambda_j dt) xi_j e_j with iid standard normals xi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralField, l2_norm

__all__ = [
    "QWienerSpec",
    "NoiseIncrement",
    "build_spectrum",
    "sample_increment",
    "sample_coefficients",
    "increment_from_coefficients",
    "eigenmode_field",
    "mode_coefficients",
    "l2q_norm",
]


def half_lattice(N: int) -> np.ndarray:
    """Representatives of the +/-k pairs with |k|_inf <= N, k != 0.

    Convention: kx > 0, or kx == 0 and ky > 0.
    """
    ks = []
    for kx in range(0, N + 1):
        for ky in range(-N, N + 1):
            if kx == 0 and ky <= 0:
                continue
            if kx > 0 or (kx == 0 and ky > 0):
                ks.append((kx, ky))
    return np.array(ks, dtype=int)


@dataclass(frozen=True)
class QWienerSpec:
    """Finite eigen-decomposition of the noise covariance Q.

    Each row of `wavevectors` carries two real modes (cosine, sine) with the
    same eigenvalue; noise coordinates are ordered
    [cos k0, sin k0, cos k1, sin k1, ...].
    """

    N: int
    gamma: float
    c: float
    s_prime: int
    wavevectors: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)  # one per wavevector

    def __post_init__(self):
        self.wavevectors.flags.writeable = False
        self.eigenvalues.flags.writeable = False

    @property
    def n_modes(self) -> int:
        return 2 * len(self.wavevectors)

    @property
    def mode_variances(self) -> np.ndarray:
        """Eigenvalue per noise coordinate (cos and sin share lambda_k)."""
        return np.repeat(self.eigenvalues, 2)

    @property
    def trace(self) -> float:
        return float(2.0 * np.sum(self.eigenvalues))

    def regularity_budget(self) -> float:
        """sum_modes lambda_k (1+|k|^2)^{s'}, the H^{s'}-valued-noise proxy."""
        ksq = np.sum(self.wavevectors.astype(float) ** 2, axis=1)
        return float(2.0 * np.sum(self.eigenvalues * (1.0 + ksq) ** self.s_prime))

    @property
    def converges_in_limit(self) -> bool:
        """Whether the H^{s'} budget would stay finite as N -> infinity.

        For lambda_k = c (1+|k|^2)^(-gamma) in dimension 2 this needs
        2 gamma - 2 s' > 2.
        """
        return 2.0 * self.gamma - 2.0 * self.s_prime > 2.0


@dataclass(frozen=True)
class NoiseIncrement:
    """One Q-Wiener increment over a step of length dt."""

    dt: float
    field: SpectralField
    coefficients: np.ndarray | None = None  # raw dW per noise coordinate


def build_spectrum(N: int, gamma: float, c: float, s_prime: int = 0) -> QWienerSpec:
    """Power-law spectrum lambda_k = c (1+|k|^2)^(-gamma) on |k|_inf <= N."""
    if N <= 0:
        raise ValueError("N must be positive")
    if c < 0:
        raise ValueError("amplitude c must be >= 0")
    ks = half_lattice(N)
    ksq = np.sum(ks.astype(float) ** 2, axis=1)
    lam = c * (1.0 + ksq) ** (-gamma)
    return QWienerSpec(N=N, gamma=float(gamma), c=float(c), s_prime=int(s_prime),
                       wavevectors=ks, eigenvalues=lam)


def _mode_directions(spec: QWienerSpec) -> np.ndarray:
    ks = spec.wavevectors.astype(float)
    knorm = np.sqrt(np.sum(ks**2, axis=1))
    d = np.stack([-ks[:, 1], ks[:, 0]], axis=1)
    return d / knorm[:, None]


def eigenmode_field(spec: QWienerSpec, j: int) -> SpectralField:
    """The j-th unit eigenfield (even j: cosine, odd j: sine)."""
    kx, ky = spec.wavevectors[j // 2]
    d = _mode_directions(spec)[j // 2].astype(complex)
    amp = np.sqrt(2.0) / 2.0
    if j % 2 == 0:
        half = amp * d
    else:
        half = -1j * amp * d  # sin(k.x) = (e^{ikx} - e^{-ikx}) / 2i
    return SpectralField.from_modes(spec.N, {(int(kx), int(ky)): half}, hermitize=True)


def sample_coefficients(spec: QWienerSpec, dt: float, n: int,
                        rng: np.random.Generator) -> np.ndarray:
    """n rows of per-mode increments sqrt(lambda dt) xi, shape (n, n_modes)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    xi = rng.standard_normal((n, spec.n_modes))
    return xi * np.sqrt(spec.mode_variances * dt)


def increment_from_coefficients(spec: QWienerSpec, coeffs: np.ndarray,
                                dt: float) -> NoiseIncrement:
    """Assemble the spectral field sum_j dW_j e_j from raw coordinates."""
    M = 2 * spec.N + 1
    c = np.zeros((2, M, M), dtype=complex)
    d = _mode_directions(spec)
    w = np.asarray(coeffs, dtype=float)
    wc = w[0::2]
    ws = w[1::2]
    amp = np.sqrt(2.0) / 2.0
    # coefficient at +k: amp*(w_cos - i w_sin) d; Hermitian partner at -k
    vec = amp * (wc - 1j * ws)[:, None] * d
    ix = spec.wavevectors[:, 0] % M
    iy = spec.wavevectors[:, 1] % M
    for comp in range(2):
        np.add.at(c[comp], (ix, iy), vec[:, comp])
        np.add.at(c[comp], ((-spec.wavevectors[:, 0]) % M, (-spec.wavevectors[:, 1]) % M),
                  np.conj(vec[:, comp]))
    return NoiseIncrement(dt=float(dt), field=SpectralField(spec.N, c),
                          coefficients=w.copy())


def sample_increment(spec: QWienerSpec, dt: float, rng: np.random.Generator,
                     keep_gaussians: bool = True) -> NoiseIncrement:
    """Draw one increment W(t+dt) - W(t) from the given stream."""
    w = sample_coefficients(spec, dt, 1, rng)[0]
    inc = increment_from_coefficients(spec, w, dt)
    if not keep_gaussians:
        inc = NoiseIncrement(dt=inc.dt, field=inc.field, coefficients=None)
    return inc


def mode_coefficients(f: SpectralField, spec: QWienerSpec) -> np.ndarray:
    """L2 projections of a real field onto the eigenmodes, shape (n_modes,)."""
    M = 2 * spec.N + 1
    d = _mode_directions(spec)
    ix = spec.wavevectors[:, 0] % M
    iy = spec.wavevectors[:, 1] % M
    cplus = f.coeffs[:, ix, iy].T  # (nk, 2)
    cdotd = np.sum(cplus * d, axis=1)
    out = np.empty(spec.n_modes)
    out[0::2] = np.sqrt(2.0) * np.real(cdotd)
    out[1::2] = -np.sqrt(2.0) * np.imag(cdotd)
    return out


def l2q_norm(apply_to_mode, spec: QWienerSpec) -> float:
    """Hilbert-Schmidt norm of A against Q: sqrt(sum_j lambda_j ||A e_j||^2).

    `apply_to_mode` maps an eigenmode SpectralField to a SpectralField.
    """
    lam = spec.mode_variances
    total = 0.0
    for j in range(spec.n_modes):
        if lam[j] == 0.0:
            continue
        total += lam[j] * l2_norm(apply_to_mode(eigenmode_field(spec, j))) ** 2
    return float(np.sqrt(total))
