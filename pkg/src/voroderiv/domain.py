"""Simulation domains and particle clouds."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Domain:
    """Axis-aligned cubic box with per-axis periodicity.

    The box spans [lo, lo + length) along every axis.  Periodic axes identify
    opposite faces; open axes do not.
    """

    dim: int
    length: float = TWO_PI
    lo: tuple[float, ...] = field(default=None)  # type: ignore[assignment]
    periodic: tuple[bool, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not (self.length > 0):
            raise ValueError("length must be positive")
        if self.lo is None:
            object.__setattr__(self, "lo", (0.0,) * self.dim)
        else:
            object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        if self.periodic is None:
            object.__setattr__(self, "periodic", (True,) * self.dim)
        else:
            object.__setattr__(self, "periodic", tuple(bool(v) for v in self.periodic))
        if len(self.lo) != self.dim or len(self.periodic) != self.dim:
            raise ValueError("lo/periodic length must match dim")

    @classmethod
    def periodic_box(cls, dim: int, length: float = TWO_PI, lo=None) -> "Domain":
        return cls(dim=dim, length=length, lo=lo, periodic=(True,) * dim)

    @classmethod
    def open_box(cls, dim: int, length: float = TWO_PI, lo=None) -> "Domain":
        return cls(dim=dim, length=length, lo=lo, periodic=(False,) * dim)

    @property
    def any_periodic(self) -> bool:
        return any(self.periodic)

    @property
    def volume(self) -> float:
        return float(self.length) ** self.dim

    def lo_array(self) -> np.ndarray:
        return np.asarray(self.lo, dtype=float)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Reduce periodic coordinates into [lo, lo+L); open axes pass through."""
        x = np.array(x, dtype=float, copy=True)
        lo = self.lo_array()
        for ax in range(self.dim):
            if self.periodic[ax]:
                x[..., ax] = lo[ax] + np.mod(x[..., ax] - lo[ax], self.length)
        return x

    def minimum_image(self, dx: np.ndarray) -> np.ndarray:
        """Map displacement vectors to their nearest periodic image."""
        dx = np.array(dx, dtype=float, copy=True)
        half = 0.5 * self.length
        for ax in range(self.dim):
            if self.periodic[ax]:
                dx[..., ax] = np.mod(dx[..., ax] + half, self.length) - half
        return dx


@dataclass
class ParticleCloud:
    """Positions (and optionally velocities) of N particles in a domain."""

    domain: Domain
    positions: np.ndarray
    velocities: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != self.domain.dim:
            raise ValueError(
                f"positions must have shape (N, {self.domain.dim}), "
                f"got {self.positions.shape}"
            )
        if not np.all(np.isfinite(self.positions)):
            raise DegenerateInputError("positions contain non-finite values")
        if self.velocities is not None:
            self.velocities = np.ascontiguousarray(self.velocities, dtype=float)
            if self.velocities.shape != self.positions.shape:
                raise ValueError("velocities shape must match positions")
            if not np.all(np.isfinite(self.velocities)):
                raise DegenerateInputError("velocities contain non-finite values")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def delta(self) -> float:
        """Mean interparticle distance L / N**(1/dim)."""
        return self.domain.length / self.n ** (1.0 / self.dim)

    def with_velocities(self, velocities: np.ndarray) -> "ParticleCloud":
        return ParticleCloud(self.domain, self.positions, velocities)
