"""
Initial-data families and the norm relations they are built to exhibit.

Radial power profiles ``|x|^{-sigma}`` are periodised by sampling on the
fundamental cell centred at the origin and multiplying by a C-infinity window
that equals 1 for ``|x| <= L/4`` and vanishes for ``|x| >= L/2``.

The sample at the singular point needs care. The discrete transform of
``|j h|^{-sigma}`` (``j != 0``) equals the continuous spectrum plus the
constant ``Z(sigma) h^{-sigma}``, where ``Z`` is the analytically continued
lattice sum ``sum_{m != 0} |m|^{-sigma}`` (``2 zeta(sigma)`` in 1D,
``4 zeta(sigma/2) beta(sigma/2)`` on the square lattice). Setting the origin
sample to ``-Z(sigma) h^{-sigma}`` cancels that offset, so the dyadic block
norms follow the homogeneous law up to the Nyquist neighbourhood. In 3D a
one-cell mollified core ``(|x|^2 + h^2)^{-sigma/2}`` is used instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .littlewood_paley import (
    BesovSpec,
    _smooth_step,
    besov_norm,
    high_pass,
    partition_for,
)
from .spectral import Grid, SpectralField, random_field
from .state import FluidState, check_vacuum

KINDS = (
    "equilibrium",
    "gaussian_bump",
    "density_jump",
    "smooth_noise",
    "quasi_solution",
    "homogeneous_profile",
    "truncated_profile",
    "scaled_profile",
)


@dataclass(frozen=True)
class DataSpec:
    """
    Initial-data descriptor.

    Only the fields relevant to ``kind`` are read. ``amplitude`` scales the
    density perturbation and ``velocity_amplitude`` the velocity noise;
    ``perturbation_amplitude`` sizes ``(h2, u2)`` for quasi-solution data.
    """

    kind: str = "equilibrium"
    amplitude: float = 0.0
    width: float = 0.5
    velocity_amplitude: float = 0.0
    perturbation_amplitude: float = 0.0
    k_max: float = 4.0
    sigma: float = 0.5
    epsilon: float = 0.1
    l0: int = 2
    lambda_scale: int = 1
    location: float = 0.25
    height: float = 0.0
    smoothing_cells: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"data kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "truncated_profile" and not (0 < self.epsilon <= 0.1):
            raise ValueError("epsilon must lie in (0, 1/10]")
        if self.kind in ("scaled_profile", "quasi_solution") and not _power_of_two(self.lambda_scale):
            raise ValueError("lambda_scale must be a power of two >= 1")
        if self.kind == "density_jump" and self.smoothing_cells < 1:
            raise ValueError("smoothing_cells must be >= 1")
        if self.width <= 0:
            raise ValueError("width must be positive")

    def validate_for(self, grid: Grid) -> None:
        if self.kind in ("homogeneous_profile",) and not (0 < self.sigma < grid.dim):
            raise ValueError(f"sigma must lie in (0, {grid.dim})")
        if self.kind == "truncated_profile":
            partition_for(grid).check_block(self.l0)


def _power_of_two(v) -> bool:
    v = int(v)
    return v >= 1 and (v & (v - 1)) == 0


# ---------------------------------------------------------------------------
# homogeneous profiles


def _radius(grid: Grid) -> np.ndarray:
    return np.sqrt(np.sum(grid.centered_coords() ** 2, axis=0))


def _window(grid: Grid) -> np.ndarray:
    r = _radius(grid)
    L = grid.box_length
    return 1.0 - _smooth_step((r - L / 4) / (L / 4))


def lattice_zeta(dim: int, sigma: float) -> float:
    """Analytic continuation of ``sum_{m in Z^dim, m != 0} |m|^{-sigma}`` for ``dim`` 1 or 2."""
    if dim == 1:
        return float(2 * mpmath.zeta(sigma))
    if dim == 2:
        t = sigma / 2.0
        beta = 4.0 ** (-t) * (mpmath.zeta(t, 0.25) - mpmath.zeta(t, 0.75))
        return float(4 * mpmath.zeta(t) * beta)
    raise ValueError("lattice sum implemented for dim 1 and 2 only")


def homogeneous_profile(sigma: float, grid: Grid) -> SpectralField:
    """
    Periodised ``|x|^{-sigma}`` with a far-field window.

    Parameters
    ----------
    sigma : float
        Homogeneity, ``0 < sigma < dim``.
    grid : Grid
    """
    if not 0 < sigma < grid.dim:
        raise ValueError(f"sigma must lie in (0, {grid.dim}), got {sigma}")
    r = _radius(grid)
    h = grid.spacing
    if grid.dim == 3:
        core = (r**2 + h**2) ** (-sigma / 2.0)
    else:
        core = np.where(r > 0, r, 1.0) ** (-sigma)
        core[(0,) * grid.dim] = -lattice_zeta(grid.dim, sigma) * h ** (-sigma)
    return SpectralField(grid, samples=core * _window(grid))


def truncated_profile(epsilon: float, l0: int, grid: Grid) -> SpectralField:
    """High-pass (keep ``|xi| >= 2^l0``) of the periodised ``|x|^{-(1 - epsilon)}``."""
    if not 0 < epsilon <= 0.1:
        raise ValueError(f"epsilon must lie in (0, 1/10], got {epsilon}")
    partition_for(grid).check_block(l0)
    return high_pass(homogeneous_profile(1.0 - epsilon, grid), l0)


def rbesov_prediction(epsilon: float, r: float, n_blocks: int) -> float:
    """
    Ratio ``||u0||_{B_{2,r}} / ||u0||_{B_{2,inf}}`` for a geometric block sequence ``2^{-j eps}``.

    With ``n_blocks`` terms this is ``((1 - 2^{-r eps n}) / (1 - 2^{-r eps}))^{1/r}``;
    the infinite-band limit is ``(1 - 2^{-r eps})^{-1/r}``.
    """
    q = 2.0 ** (-r * epsilon)
    return ((1.0 - q**n_blocks) / (1.0 - q)) ** (1.0 / r)


def truncated_profile_report(epsilon: float, l0: int, grid: Grid, r: float = 2.0) -> dict:
    """Critical norms ``B^{N/2-1}_{2,inf}`` and ``B^{N/2-1}_{2,r}`` of the truncated profile."""
    u0 = truncated_profile(epsilon, l0, grid)
    s = grid.dim / 2.0 - 1.0
    part = partition_for(grid)
    n_blocks = part.j_max - l0 + 1
    binf = besov_norm(u0, BesovSpec(s, 2.0, math.inf))
    br = besov_norm(u0, BesovSpec(s, 2.0, r))
    low = [float(np.max(np.abs(part.block_coeffs(u0.coeffs, l)))) for l in part.blocks if l < l0 - 1]
    return {
        "epsilon": epsilon,
        "l0": l0,
        "r": r,
        "besov_inf": binf,
        "besov_r": br,
        "ratio": br / binf,
        "predicted_ratio": rbesov_prediction(epsilon, r, n_blocks),
        "predicted_ratio_infinite_band": (1.0 - 2.0 ** (-r * epsilon)) ** (-1.0 / r),
        "max_low_block_coeff": max(low) if low else 0.0,
    }


# ---------------------------------------------------------------------------
# scaled profile


def scaled_profile(phi: SpectralField, lambda_scale: int) -> SpectralField:
    """
    ``h(x) = phi(lambda x)`` on the fundamental cell, one copy centred at the origin.

    Sample ``j`` (centred index) takes ``phi`` at index ``lambda j`` when that
    index lies in the cell, else 0, so ``phi`` must be localised near the
    origin and resolved on the coarser ``n / lambda`` sub-grid.
    """
    lam = int(lambda_scale)
    if not _power_of_two(lam):
        raise ValueError(f"lambda_scale must be a power of two, got {lambda_scale}")
    if lam == 1:
        return SpectralField(phi.grid, samples=phi.samples)
    grid = phi.grid
    n = grid.n
    j = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    src = lam * j
    inside = np.abs(src) < n // 2
    idx1 = np.where(inside, src % n, 0)
    out = phi.samples
    for ax in range(grid.dim):
        out = np.take(out, idx1, axis=ax - grid.dim)
        shape = [1] * grid.dim
        shape[ax] = n
        out = out * inside.reshape(shape)
    return SpectralField(grid, samples=out)


def localized_bump(grid: Grid, width: float, *, laplacian_power: int = 2) -> SpectralField:
    """``Delta^k exp(-|x|^2 / (2 width^2))`` normalised to unit sup norm; its spectrum vanishes at 0."""
    r2 = _radius(grid) ** 2
    g = grid.fft(np.exp(-r2 / (2.0 * width**2)))
    g = g * (-grid.k2) ** laplacian_power
    s = grid.ifft(g)
    return SpectralField(grid, samples=s / np.max(np.abs(s)))


def scaled_profile_report(phi: SpectralField, lambda_scale: int) -> dict:
    """The four quantities compared under ``x -> lambda x``."""
    h = scaled_profile(phi, lambda_scale)
    N = phi.grid.dim
    hi, lo = BesovSpec(N / 2.0, 2.0, 1.0), BesovSpec(N / 2.0 - 2.0, 2.0, 1.0)
    return {
        "lambda": lambda_scale,
        "besov_high_phi": besov_norm(phi, hi),
        "besov_high_h": besov_norm(h, hi),
        "besov_low_phi": besov_norm(phi, lo),
        "besov_low_h": besov_norm(h, lo),
        "linf_phi": phi.norm_linf(),
        "linf_h": h.norm_linf(),
        "low_ratio": besov_norm(h, lo) / besov_norm(phi, lo),
        "expected_low_ratio": float(lambda_scale) ** -2,
    }


# ---------------------------------------------------------------------------
# densities and states


def gaussian_bump(grid: Grid, amplitude: float, width: float, center=None) -> SpectralField:
    """``rho = 1 + amplitude * exp(-|x - center|^2 / (2 width^2))`` (periodic distance)."""
    x = grid.centered_coords()
    if center is not None:
        L = grid.box_length
        c = np.asarray(center, dtype=float).reshape(-1, *([1] * grid.dim))
        x = (x - c + L / 2) % L - L / 2
    r2 = np.sum(x**2, axis=0)
    rho = 1.0 + amplitude * np.exp(-r2 / (2.0 * width**2))
    check_vacuum(rho)
    return SpectralField(grid, samples=rho)


def density_jump(
    grid: Grid, location: float, height: float, smoothing_cells: float = 2.0, base: float = 1.0
) -> SpectralField:
    """
    Smoothed jump along the first axis from ``base`` to ``base + height``.

    The density equals ``base + height`` on ``[location, location + L/2)``
    (periodically) with ``tanh`` edges of width ``smoothing_cells`` cells.
    """
    if smoothing_cells < 1:
        raise ValueError("smoothing_cells must be >= 1")
    L = grid.box_length
    w = smoothing_cells * grid.spacing
    x0 = location * L
    x = grid.coords[0]

    def edge(c):
        d = (x - c + L / 2) % L - L / 2
        return np.tanh(d / w)

    plateau = 0.5 * (edge(x0) - edge(x0 + L / 2))
    plateau = (plateau - plateau.min()) / (plateau.max() - plateau.min()) if height else 0.0 * plateau
    rho = base + height * plateau
    check_vacuum(rho)
    return SpectralField(grid, samples=rho)


def smooth_noise(grid: Grid, rng: np.random.Generator, amplitude: float, k_max: float, rank="scalar"):
    """Band-limited seeded noise with sup norm ``amplitude``."""
    f = random_field(grid, rng, rank=rank, k_max=k_max)
    m = np.max(np.abs(f.samples))
    return SpectralField(grid, samples=amplitude * f.samples / m if m > 0 else f.samples)


def quasi_solution_data(
    rho1_0: SpectralField, h2_0: SpectralField, u2_0: SpectralField, mu: float
) -> FluidState:
    """``q0 = ln rho1_0 + h2_0`` and ``u0 = -mu grad ln rho1_0 + u2_0``."""
    check_vacuum(rho1_0.samples)
    grid = rho1_0.grid
    l = grid.fft(np.log(rho1_0.samples))
    q = SpectralField(grid, samples=grid.ifft(l) + h2_0.samples)
    u = SpectralField(grid, samples=grid.ifft(-mu * 1j * grid.kd * l) + u2_0.samples)
    return FluidState(q, u)


def split_quasi_solution_data(state: FluidState, rho1_0: SpectralField, mu: float):
    """Inverse of :func:`quasi_solution_data`: return ``(h2_0, u2_0)``."""
    grid = state.grid
    l = grid.fft(np.log(rho1_0.samples))
    h2 = SpectralField(grid, samples=state.q.samples - grid.ifft(l))
    u2 = SpectralField(grid, samples=state.u.samples - grid.ifft(-mu * 1j * grid.kd * l))
    return h2, u2


def build_field(spec: DataSpec, grid: Grid, seed: int = 0) -> SpectralField:
    """Scalar field of a profile-type spec (used by the ``data`` subcommand)."""
    spec.validate_for(grid)
    if spec.kind == "homogeneous_profile":
        return homogeneous_profile(spec.sigma, grid)
    if spec.kind == "truncated_profile":
        return truncated_profile(spec.epsilon, spec.l0, grid)
    if spec.kind == "scaled_profile":
        return scaled_profile(localized_bump(grid, spec.width), spec.lambda_scale)
    if spec.kind == "density_jump":
        return density_jump(grid, spec.location, spec.height, spec.smoothing_cells)
    if spec.kind == "gaussian_bump":
        return gaussian_bump(grid, spec.amplitude, spec.width)
    if spec.kind == "smooth_noise":
        return smooth_noise(grid, np.random.default_rng(seed), spec.amplitude, spec.k_max)
    if spec.kind == "quasi_solution":
        return _rho1(spec, grid)
    return SpectralField(grid, samples=np.ones(grid.shape))


def _rho1(spec: DataSpec, grid: Grid) -> SpectralField:
    if spec.lambda_scale > 1:
        phi = localized_bump(grid, spec.width, laplacian_power=0)
        h1 = scaled_profile(phi, spec.lambda_scale)
        rho = 1.0 + spec.amplitude * h1.samples
        check_vacuum(rho)
        return SpectralField(grid, samples=rho)
    return gaussian_bump(grid, spec.amplitude, spec.width)


def build_initial(config):
    """
    ``(state0, rho1_0)`` for a run config.

    The state is expressed in ``(q, u)``; ``rho1_0`` is the quasi-solution
    background for the ``perturbation`` and ``heat`` variants (else ``None``).
    """
    spec: DataSpec = config.data
    grid: Grid = config.grid
    rng = np.random.default_rng(config.seed)
    zero_u = SpectralField.zeros(grid, "vector")
    if spec.kind == "quasi_solution":
        rho1 = _rho1(spec, grid)
        eps = spec.perturbation_amplitude
        h2 = smooth_noise(grid, rng, eps, spec.k_max) if eps else SpectralField.zeros(grid)
        u2 = smooth_noise(grid, rng, eps, spec.k_max, "vector") if eps else zero_u
        if config.variant == "perturbation":
            return quasi_solution_data(rho1, h2, u2, config.params.mu), rho1
        if config.variant == "heat":
            return quasi_solution_data(rho1, SpectralField.zeros(grid), zero_u, config.params.mu), rho1
        return quasi_solution_data(rho1, h2, u2, config.params.mu), None
    if config.variant in ("perturbation", "heat"):
        raise ValueError(f"variant {config.variant!r} needs quasi_solution data")
    if spec.kind == "smooth_noise":
        q = smooth_noise(grid, rng, spec.amplitude, spec.k_max)
    elif spec.kind in ("gaussian_bump", "density_jump"):
        rho = build_field(spec, grid)
        q = SpectralField(grid, samples=np.log(rho.samples))
    elif spec.kind == "equilibrium":
        q = SpectralField.zeros(grid)
    else:
        raise ValueError(f"data kind {spec.kind!r} is not an initial state")
    u = smooth_noise(grid, rng, spec.velocity_amplitude, spec.k_max, "vector") if spec.velocity_amplitude else zero_u
    return FluidState(q, u), None


__all__ = [
    "DataSpec",
    "KINDS",
    "build_field",
    "build_initial",
    "density_jump",
    "gaussian_bump",
    "homogeneous_profile",
    "lattice_zeta",
    "localized_bump",
    "quasi_solution_data",
    "rbesov_prediction",
    "scaled_profile",
    "scaled_profile_report",
    "smooth_noise",
    "split_quasi_solution_data",
    "truncated_profile",
    "truncated_profile_report",
]
