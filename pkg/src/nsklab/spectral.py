"""
Periodic-box grids, spectral fields and Fourier multipliers.

Every other module works through the objects defined here: a :class:`Grid`
describing the torus ``[0, L)^dim`` and a :class:`SpectralField` that keeps a
scalar or vector field in sample space and (lazily) in Fourier space.

Conventions
-----------
* Coefficients are the unnormalised ``numpy.fft.fftn`` of the samples, so the
  zero mode equals ``n**dim * mean``.
* First derivatives use wavenumbers with the Nyquist entry set to zero
  (``Grid.kd``); second-order symbols such as the Laplacian use the full
  wavenumbers (``Grid.k2``).
* Inverse symbols are regularised at ``xi = 0`` by setting the mode to zero,
  i.e. fields are treated modulo constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

Symbol = Union[np.ndarray, Callable[["Grid"], np.ndarray]]


@dataclass(frozen=True)
class Grid:
    """
    Uniform periodic grid on ``[0, box_length)^dim``.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 to 3.
    n : int
        Points per axis, a power of two no smaller than 8.
    box_length : float
        Side length ``L`` of the periodic box.
    """

    dim: int = 2
    n: int = 64
    box_length: float = 2.0 * np.pi

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def volume(self) -> float:
        return self.box_length**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def k_min(self) -> float:
        """Smallest non-zero wavenumber magnitude ``2 pi / L``."""
        return 2.0 * np.pi / self.box_length

    @property
    def k_nyquist(self) -> float:
        return np.pi * self.n / self.box_length

    @cached_property
    def k1d(self) -> np.ndarray:
        return self.k_min * np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def kvec(self) -> np.ndarray:
        """Full wavevector, shape ``(dim, *shape)``."""
        return np.stack(np.meshgrid(*([self.k1d] * self.dim), indexing="ij"))

    @cached_property
    def kd(self) -> np.ndarray:
        """Derivative wavevector: as :attr:`kvec` but zero on Nyquist planes."""
        k = self.k1d.copy()
        k[self.n // 2] = 0.0
        return np.stack(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.kvec**2, axis=0)

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True on modes kept by the 2/3 rule (``|xi| < 2/3 xi_Nyquist``)."""
        return self.kabs < (2.0 / 3.0) * self.k_nyquist * (1.0 - 1e-12)

    @cached_property
    def coords(self) -> np.ndarray:
        """Sample coordinates, shape ``(dim, *shape)``."""
        x = self.spacing * np.arange(self.n)
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def centered_coords(self) -> np.ndarray:
        """Coordinates shifted to ``[-L/2, L/2)`` with the origin at index 0."""
        x = self.spacing * np.arange(self.n)
        x = np.where(x >= self.box_length / 2, x - self.box_length, x)
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.n * factor, self.box_length)

    # transforms on raw arrays; leading axes are components
    def fft(self, a: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return np.fft.fftn(a, axes=axes)

    def ifft(self, a: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return np.fft.ifftn(a, axes=axes).real

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Rectangle-rule ``L^2`` inner product of real sample arrays."""
        return float(np.sum(a * b) * self.cell_volume)

    def spectral_l2sq(self, ahat: np.ndarray) -> float:
        """``||a||_{L^2}^2`` from coefficients (Parseval, exact for the rectangle rule)."""
        return float(np.sum(np.abs(ahat) ** 2) * self.cell_volume / self.n**self.dim)


class SpectralField:
    """
    Scalar or vector field on a :class:`Grid`.

    The sample array has shape ``grid.shape`` (scalar) or
    ``(dim, *grid.shape)`` (vector). Arrays are stored read-only; the Fourier
    coefficients are computed on first access and cached.
    """

    __slots__ = ("grid", "_samples", "_coeffs")

    def __init__(self, grid: Grid, samples=None, coeffs=None, *, check_finite: bool = True):
        if (samples is None) == (coeffs is None):
            raise ValueError("give exactly one of samples or coeffs")
        self.grid = grid
        self._samples = None
        self._coeffs = None
        if samples is not None:
            arr = np.array(samples, dtype=float)
            _check_shape(grid, arr.shape)
            if check_finite and not np.all(np.isfinite(arr)):
                raise ValueError("field samples contain non-finite values")
            arr.flags.writeable = False
            self._samples = arr
        else:
            arr = np.array(coeffs, dtype=complex)
            _check_shape(grid, arr.shape)
            if check_finite and not np.all(np.isfinite(arr)):
                raise ValueError("field coefficients contain non-finite values")
            arr.flags.writeable = False
            self._coeffs = arr

    @classmethod
    def from_coeffs(cls, grid: Grid, coeffs) -> "SpectralField":
        return cls(grid, coeffs=coeffs)

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[..., np.ndarray]) -> "SpectralField":
        """Sample ``func(*coords)`` on the grid."""
        return cls(grid, samples=func(*grid.coords))

    @classmethod
    def zeros(cls, grid: Grid, rank: str = "scalar") -> "SpectralField":
        shape = grid.shape if rank == "scalar" else (grid.dim, *grid.shape)
        return cls(grid, samples=np.zeros(shape))

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            arr = self.grid.ifft(self._coeffs)
            arr.flags.writeable = False
            self._samples = arr
        return self._samples

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            arr = self.grid.fft(self._samples)
            arr.flags.writeable = False
            self._coeffs = arr
        return self._coeffs

    @property
    def rank(self) -> str:
        arr = self._samples if self._samples is not None else self._coeffs
        return "scalar" if arr.ndim == self.grid.dim else "vector"

    @property
    def is_vector(self) -> bool:
        return self.rank == "vector"

    def component(self, i: int) -> "SpectralField":
        if not self.is_vector:
            raise ValueError("scalar field has no components")
        return SpectralField(self.grid, samples=self.samples[i])

    def mean(self):
        axes = tuple(range(-self.grid.dim, 0))
        return np.mean(self.samples, axis=axes)

    def norm_l2(self) -> float:
        return float(np.sqrt(self.grid.spectral_l2sq(self.coeffs)))

    def norm_lp(self, p: float) -> float:
        return lp_norm(self.grid, self.samples, p)

    def norm_linf(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def _binary(self, other, op):
        if isinstance(other, SpectralField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            other = other.samples
        return SpectralField(self.grid, samples=op(self.samples, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, samples=-self.samples)

    def __repr__(self) -> str:
        return f"SpectralField(rank={self.rank!r}, grid={self.grid!r})"


def _check_shape(grid: Grid, shape: tuple[int, ...]) -> None:
    if tuple(shape) == grid.shape:
        return
    if tuple(shape) == (grid.dim, *grid.shape):
        return
    raise ValueError(f"array shape {shape} does not match grid {grid.shape}")


def lp_norm(grid: Grid, a: np.ndarray, p: float) -> float:
    """Rectangle-rule ``L^p`` norm; vector fields use the pointwise Euclidean norm."""
    a = np.asarray(a)
    if a.ndim == grid.dim + 1:
        a = np.sqrt(np.sum(a**2, axis=0))
    else:
        a = np.abs(a)
    if np.isinf(p):
        return float(np.max(a))
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float((np.sum(a**p) * grid.cell_volume) ** (1.0 / p))


# ---------------------------------------------------------------------------
# multipliers and differential operators


def transform_roundtrip(f: SpectralField) -> SpectralField:
    """Forward then inverse transform of ``f``; rejects non-finite input."""
    if not np.all(np.isfinite(f.samples)):
        raise ValueError("non-finite samples")
    coeffs = f.grid.fft(f.samples)
    return SpectralField(f.grid, samples=f.grid.ifft(coeffs))


def _symbol_array(grid: Grid, m: Symbol) -> np.ndarray:
    arr = m(grid) if callable(m) else m
    arr = np.asarray(arr, dtype=complex)
    lead = arr.shape[: arr.ndim - grid.dim] if arr.ndim >= grid.dim else ()
    arr = np.broadcast_to(arr, lead + grid.shape)
    bad = ~np.isfinite(arr)
    if bad.any():
        zero = (0,) * grid.dim
        at_zero = np.zeros(grid.shape, dtype=bool)
        at_zero[zero] = True
        bad_modes = np.any(bad.reshape(-1, *grid.shape), axis=0)
        if np.any(bad_modes & ~at_zero):
            raise ValueError("multiplier is singular at a non-zero grid wavenumber")
        arr = np.where(bad, 0.0, arr)
    return arr


def apply_multiplier(f: SpectralField, m: Symbol) -> SpectralField:
    """
    Multiply the coefficients of ``f`` by the symbol ``m``.

    ``m`` is an array (or a callable ``grid -> array``) of shape
    ``grid.shape`` for a scalar symbol, or ``(out, in, *grid.shape)`` for a
    matrix symbol acting on vector components. Non-finite values at
    ``xi = 0`` are replaced by zero; anywhere else they are an error.
    """
    grid = f.grid
    sym = _symbol_array(grid, m)
    fh = f.coeffs
    if sym.ndim == grid.dim:
        out = sym * fh
    elif sym.ndim == grid.dim + 1:
        # vector-valued symbol applied to a scalar field
        if f.is_vector:
            raise ValueError("vector symbol needs a scalar field")
        out = sym * fh[None]
    else:
        vec = fh if f.is_vector else fh[None]
        out = np.einsum("ij...,j...->i...", sym, vec)
        if out.shape[0] == 1:
            out = out[0]
    return SpectralField(grid, coeffs=out)


def dealias(f: SpectralField) -> SpectralField:
    """Zero every mode with ``|xi|`` at or above two thirds of the Nyquist wavenumber."""
    return SpectralField(f.grid, coeffs=f.coeffs * f.grid.dealias_mask)


def gradient(f: SpectralField) -> SpectralField:
    return apply_multiplier(f, 1j * f.grid.kd)


def divergence(f: SpectralField) -> SpectralField:
    if not f.is_vector:
        raise ValueError("divergence needs a vector field")
    return SpectralField(f.grid, coeffs=np.sum(1j * f.grid.kd * f.coeffs, axis=0))


def laplacian(f: SpectralField) -> SpectralField:
    return apply_multiplier(f, -f.grid.k2)


def inverse_laplacian(f: SpectralField) -> SpectralField:
    """``Delta^{-1}`` with the zero mode removed."""
    with np.errstate(divide="ignore"):
        return apply_multiplier(f, -1.0 / f.grid.k2)


def curl(f: SpectralField) -> SpectralField:
    """Scalar vorticity in 2D, vector curl in 3D."""
    if not f.is_vector or f.grid.dim == 1:
        raise ValueError("curl needs a vector field in 2D or 3D")
    k = 1j * f.grid.kd
    uh = f.coeffs
    if f.grid.dim == 2:
        return SpectralField(f.grid, coeffs=k[0] * uh[1] - k[1] * uh[0])
    return SpectralField(
        f.grid,
        coeffs=np.stack(
            [
                k[1] * uh[2] - k[2] * uh[1],
                k[2] * uh[0] - k[0] * uh[2],
                k[0] * uh[1] - k[1] * uh[0],
            ]
        ),
    )


def helmholtz_split(grid: Grid, uhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split vector coefficients into potential and solenoidal parts (derivative wavenumbers)."""
    kd = grid.kd
    s = np.sum(kd**2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        proj = np.where(s > 0, np.sum(kd * uhat, axis=0) / s, 0.0)
    pot = kd * proj
    return pot, uhat - pot


def random_field(
    grid: Grid,
    rng: np.random.Generator,
    *,
    rank: str = "scalar",
    k_max: float | None = None,
    slope: float = 0.0,
    zero_mean: bool = True,
) -> SpectralField:
    """
    Seeded smooth random field, band-limited below ``k_max``.

    The default band limit is the 2/3-rule radius so products of two such
    fields are alias-free after :func:`dealias`. Amplitudes decay like
    ``(1 + |xi|)^(-slope)``; the result is rescaled to unit ``L^2`` norm.
    """
    shape = grid.shape if rank == "scalar" else (grid.dim, *grid.shape)
    white = rng.standard_normal(shape)
    hat = grid.fft(white)
    kmax = (2.0 / 3.0) * grid.k_nyquist if k_max is None else k_max
    mask = grid.kabs < kmax * (1.0 - 1e-12)
    # exclude Nyquist planes so odd derivatives are exact
    for ax in range(grid.dim):
        idx = [slice(None)] * grid.dim
        idx[ax] = grid.n // 2
        mask[tuple(idx)] = False
    hat = hat * mask * (1.0 + grid.kabs) ** (-slope)
    if zero_mean:
        hat[(..., *([0] * grid.dim))] = 0.0
    samples = grid.ifft(hat)
    nrm = np.sqrt(grid.inner(samples, samples))
    if nrm == 0:
        return SpectralField(grid, samples=samples)
    return SpectralField(grid, samples=samples / nrm)


__all__ = [
    "Grid",
    "SpectralField",
    "apply_multiplier",
    "curl",
    "dealias",
    "divergence",
    "gradient",
    "helmholtz_split",
    "inverse_laplacian",
    "laplacian",
    "lp_norm",
    "random_field",
    "transform_roundtrip",
]
