"""
The ``(q, u)`` fluid state shared by the model, solver and diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid, SpectralField

VACUUM_FLOOR = 1e-6


@dataclass(frozen=True)
class FluidState:
    """
    Log-density ``q = ln rho`` and velocity ``u`` at time ``t``.

    ``u`` is always a vector field, shape ``(dim, *grid.shape)``, also in 1D.
    """

    q: SpectralField
    u: SpectralField
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.q.grid != self.u.grid:
            raise ValueError("q and u live on different grids")
        if self.q.is_vector:
            raise ValueError("q must be a scalar field")
        if not self.u.is_vector:
            raise ValueError("u must be a vector field")

    @property
    def grid(self) -> Grid:
        return self.q.grid

    @property
    def rho(self) -> SpectralField:
        return SpectralField(self.grid, samples=np.exp(self.q.samples))

    @classmethod
    def from_rho(cls, rho: SpectralField, u: SpectralField, t: float = 0.0) -> "FluidState":
        check_vacuum(rho.samples)
        return cls(SpectralField(rho.grid, samples=np.log(rho.samples)), u, t)

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "FluidState":
        return cls(SpectralField.zeros(grid), SpectralField.zeros(grid, "vector"), t)

    def coeffs(self) -> np.ndarray:
        """Stacked coefficients ``(q, u_1, ..., u_dim)``, shape ``(1 + dim, *shape)``."""
        return np.concatenate([self.q.coeffs[None], self.u.coeffs])

    @classmethod
    def from_coeffs(cls, grid: Grid, x: np.ndarray, t: float = 0.0) -> "FluidState":
        return cls(SpectralField(grid, coeffs=x[0]), SpectralField(grid, coeffs=x[1:]), t)

    def with_time(self, t: float) -> "FluidState":
        return FluidState(self.q, self.u, t)


def check_vacuum(rho: np.ndarray, floor: float = VACUUM_FLOOR) -> None:
    lo = float(np.min(rho))
    if not lo > floor:
        raise ValueError(f"vacuum: min rho = {lo:.3e} <= {floor:g}")


__all__ = ["FluidState", "VACUUM_FLOOR", "check_vacuum"]
