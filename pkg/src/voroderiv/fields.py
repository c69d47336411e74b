"""Velocity fields, cloud seeding, advection, and inertial particles.

Analytic fields carry closed-form gradients so every operator test has an
exact reference.  The synthetic field superposes single-wavenumber sine modes
with random phases and a power-law amplitude, giving a prescribed energy
spectrum together with exact derivatives at any point.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import Domain, ParticleCloud
from .errors import UnstableStepWarning
from .operators import TimePair, advect_euler  # re-exported for convenience
from .rng import stream

__all__ = [
    "AnalyticField",
    "analytic_field",
    "list_analytic_fields",
    "SyntheticSpectrumField",
    "seed_uniform",
    "sample_velocities",
    "advect_euler",
    "integrate_inertial",
    "kolmogorov_time",
    "stokes_number",
]


class _GradientOps:
    """Divergence and curl derived from a gradient(X) -> (N, d, d) method."""

    def divergence(self, x: np.ndarray) -> np.ndarray:
        g = self.gradient(x)
        return np.trace(g, axis1=1, axis2=2)

    def curl(self, x: np.ndarray) -> np.ndarray:
        g = self.gradient(x)
        if g.shape[1] == 2:
            return g[:, 1, 0] - g[:, 0, 1]
        return np.stack(
            [
                g[:, 2, 1] - g[:, 1, 2],
                g[:, 0, 2] - g[:, 2, 0],
                g[:, 1, 0] - g[:, 0, 1],
            ],
            axis=1,
        )


@dataclass
class AnalyticField(_GradientOps):
    name: str
    dim: int
    periodic: bool
    velocity: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]


def _field_single_cosine_2d() -> AnalyticField:
    # u = (cos x cos y, 0); divergence = -sin x cos y
    def vel(x):
        u = np.zeros_like(x)
        u[:, 0] = np.cos(x[:, 0]) * np.cos(x[:, 1])
        return u

    def grad(x):
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 0] = -np.sin(x[:, 0]) * np.cos(x[:, 1])
        g[:, 0, 1] = -np.cos(x[:, 0]) * np.sin(x[:, 1])
        return g

    return AnalyticField("single_cosine_2d", 2, True, vel, grad)


def _field_single_sine_3d() -> AnalyticField:
    # u = (sin x cos y cos z, 0, 0); divergence = cos x cos y cos z
    def vel(x):
        u = np.zeros_like(x)
        u[:, 0] = np.sin(x[:, 0]) * np.cos(x[:, 1]) * np.cos(x[:, 2])
        return u

    def grad(x):
        g = np.zeros((len(x), 3, 3))
        cx, cy, cz = np.cos(x[:, 0]), np.cos(x[:, 1]), np.cos(x[:, 2])
        sx, sy, sz = np.sin(x[:, 0]), np.sin(x[:, 1]), np.sin(x[:, 2])
        g[:, 0, 0] = cx * cy * cz
        g[:, 0, 1] = -sx * sy * cz
        g[:, 0, 2] = -sx * cy * sz
        return g

    return AnalyticField("single_sine_3d", 3, True, vel, grad)


def _field_potential_2d() -> AnalyticField:
    # u = grad(sin x cos y): irrotational, divergence = -2 sin x cos y
    def vel(x):
        sx, cx = np.sin(x[:, 0]), np.cos(x[:, 0])
        sy, cy = np.sin(x[:, 1]), np.cos(x[:, 1])
        return np.stack([cx * cy, -sx * sy], axis=1)

    def grad(x):
        sx, cx = np.sin(x[:, 0]), np.cos(x[:, 0])
        sy, cy = np.sin(x[:, 1]), np.cos(x[:, 1])
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = -sx * cy
        g[:, 0, 1] = -cx * sy
        g[:, 1, 0] = -cx * sy
        g[:, 1, 1] = -sx * cy
        return g

    return AnalyticField("potential_2d", 2, True, vel, grad)


def _field_potential_3d() -> AnalyticField:
    # u = grad(-cos x cos y cos z); divergence = 3 cos x cos y cos z
    def trig(x):
        return (
            np.sin(x[:, 0]), np.cos(x[:, 0]),
            np.sin(x[:, 1]), np.cos(x[:, 1]),
            np.sin(x[:, 2]), np.cos(x[:, 2]),
        )

    def vel(x):
        sx, cx, sy, cy, sz, cz = trig(x)
        return np.stack([sx * cy * cz, cx * sy * cz, cx * cy * sz], axis=1)

    def grad(x):
        sx, cx, sy, cy, sz, cz = trig(x)
        g = np.empty((len(x), 3, 3))
        g[:, 0, 0] = cx * cy * cz
        g[:, 0, 1] = -sx * sy * cz
        g[:, 0, 2] = -sx * cy * sz
        g[:, 1, 0] = -sx * sy * cz
        g[:, 1, 1] = cx * cy * cz
        g[:, 1, 2] = -cx * sy * sz
        g[:, 2, 0] = -sx * cy * sz
        g[:, 2, 1] = -cx * sy * sz
        g[:, 2, 2] = cx * cy * cz
        return g

    return AnalyticField("potential_3d", 3, True, vel, grad)


def _field_shear_2d() -> AnalyticField:
    # u = (y, 0): traceless, constant gradient, not periodic
    def vel(x):
        return np.stack([x[:, 1], np.zeros(len(x))], axis=1)

    def grad(x):
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 1] = 1.0
        return g

    return AnalyticField("shear_2d", 2, False, vel, grad)


def _field_rigid_rotation_2d() -> AnalyticField:
    # u = (-y, x): curl 2, divergence 0, not periodic
    def vel(x):
        return np.stack([-x[:, 1], x[:, 0]], axis=1)

    def grad(x):
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 1] = -1.0
        g[:, 1, 0] = 1.0
        return g

    return AnalyticField("rigid_rotation_2d", 2, False, vel, grad)


def _field_sine_wave(dim: int = 2, k: int = 1) -> AnalyticField:
    # u = (sin k x, 0, ...): divergence = k cos k x
    k = int(k)

    def vel(x):
        u = np.zeros_like(x)
        u[:, 0] = np.sin(k * x[:, 0])
        return u

    def grad(x):
        g = np.zeros((len(x), x.shape[1], x.shape[1]))
        g[:, 0, 0] = k * np.cos(k * x[:, 0])
        return g

    return AnalyticField(f"sine_wave_k{k}", dim, True, vel, grad)


def _field_linear(dim: int = 2, matrix=None, seed: int = 0) -> AnalyticField:
    # u = A x: exact gradient A everywhere, not periodic
    if matrix is None:
        matrix = stream(seed, "linear_field").normal(size=(dim, dim))
    a = np.asarray(matrix, dtype=float)
    if a.shape != (dim, dim):
        raise ValueError(f"matrix must be ({dim}, {dim})")

    def vel(x):
        return x @ a.T

    def grad(x):
        return np.broadcast_to(a, (len(x), dim, dim)).copy()

    return AnalyticField("linear", dim, False, vel, grad)


_REGISTRY = {
    "single_cosine_2d": _field_single_cosine_2d,
    "single_sine_3d": _field_single_sine_3d,
    "potential_2d": _field_potential_2d,
    "potential_3d": _field_potential_3d,
    "shear_2d": _field_shear_2d,
    "rigid_rotation_2d": _field_rigid_rotation_2d,
    "sine_wave": _field_sine_wave,
    "linear": _field_linear,
}


def list_analytic_fields() -> tuple[str, ...]:
    return tuple(_REGISTRY)


def analytic_field(name: str, **params) -> AnalyticField:
    """Build a registered analytic field; extra params go to its factory."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown field {name!r}; known: {sorted(_REGISTRY)}"
        ) from None
    return factory(**params)


DEFAULT_SPECTRUM_EXPONENT = {2: -3.0, 3: -5.0 / 3.0}


@dataclass
class SyntheticSpectrumField(_GradientOps):
    """Superposition of sine modes with power-law amplitudes.

    Component i sums over integer wavenumbers k = 1..k_max and axes a:
    u_i += E(k)**0.5 * sin(k * x_a + phase[k, i, a]) with E(k) = k**exponent,
    so the energy spectrum follows the prescribed power law and every
    derivative is available in closed form.
    """

    dim: int
    k_max: int
    exponent: float
    phases: np.ndarray  # (k_max, dim, dim): [k, component, axis]
    chunk: int = 1 << 18

    @classmethod
    def random(cls, dim, k_max=256, exponent=None, seed=0, rng=None):
        if exponent is None:
            exponent = DEFAULT_SPECTRUM_EXPONENT[dim]
        if rng is None:
            rng = stream(seed, "synthetic_field_phases")
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(k_max, dim, dim))
        return cls(dim=dim, k_max=k_max, exponent=float(exponent), phases=phases)

    def _evaluate(self, x, need_gradient):
        x = np.asarray(x, dtype=float)
        n, dim = x.shape
        if dim != self.dim:
            raise ValueError(f"expected dim {self.dim}, got {dim}")
        amp = np.arange(1, self.k_max + 1, dtype=float) ** (self.exponent / 2.0)
        cosr = np.cos(self.phases)
        sinr = np.sin(self.phases)
        u = np.zeros((n, dim))
        g = np.zeros((n, dim, dim)) if need_gradient else None
        for start in range(0, n, self.chunk):
            sl = slice(start, min(start + self.chunk, n))
            xs = x[sl]
            m = xs.shape[0]
            s1 = np.sin(xs)
            c1 = np.cos(xs)
            # recurrences for sin(k x_a), cos(k x_a) avoid k_max*dim sin calls
            sk = s1.copy()
            ck = c1.copy()
            for ki in range(self.k_max):
                a_k = amp[ki]
                if ki > 0:
                    sk, ck = sk * c1 + ck * s1, ck * c1 - sk * s1
                for i in range(dim):
                    for ax in range(dim):
                        cr = cosr[ki, i, ax]
                        sr = sinr[ki, i, ax]
                        u[sl, i] += a_k * (sk[:, ax] * cr + ck[:, ax] * sr)
                        if need_gradient:
                            g[sl, i, ax] += (a_k * (ki + 1)) * (
                                ck[:, ax] * cr - sk[:, ax] * sr
                            )
        return u, g

    def velocity(self, x: np.ndarray) -> np.ndarray:
        return self._evaluate(x, False)[0]

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self._evaluate(x, True)[1]

    @property
    def periodic(self) -> bool:
        return True

    @property
    def name(self) -> str:
        return f"synthetic_k{self.k_max}"


def seed_uniform(domain: Domain, n: int, seed: int = 0, rng=None) -> ParticleCloud:
    """Uniformly random positions in the box (no velocities)."""
    if rng is None:
        rng = stream(seed, "seed_uniform")
    pos = domain.lo_array() + domain.length * rng.random((int(n), domain.dim))
    return ParticleCloud(domain, pos)


def sample_velocities(cloud: ParticleCloud, field) -> ParticleCloud:
    """Attach field velocities evaluated at the particle positions."""
    return cloud.with_velocities(field.velocity(cloud.positions))


def kolmogorov_time(nu: float, eps: float) -> float:
    return float(np.sqrt(nu / eps))


def stokes_number(tau_p: float, nu: float, eps: float) -> float:
    return float(tau_p / kolmogorov_time(nu, eps))


def integrate_inertial(
    cloud: ParticleCloud,
    field,
    tau_p: float,
    dt: float,
    n_steps: int,
    record_every: int = 0,
):
    """Explicit Euler integration of linear-drag particles.

    dx/dt = v, dv/dt = -(v - u(x)) / tau_p, positions wrapped on periodic
    axes.  Warns when dt > tau_p / 2, where the explicit drag update starts
    to amplify.

    Returns the final cloud, or (final cloud, list of recorded clouds) when
    record_every > 0.
    """
    if not tau_p > 0:
        raise ValueError("tau_p must be positive")
    if dt > 0.5 * tau_p:
        warnings.warn(
            f"dt={dt} exceeds tau_p/2={0.5 * tau_p}: explicit drag update "
            "may be unstable",
            UnstableStepWarning,
            stacklevel=2,
        )
    x = cloud.positions.copy()
    v = (
        cloud.velocities.copy()
        if cloud.velocities is not None
        else field.velocity(x)
    )
    history = []
    for step in range(int(n_steps)):
        u = field.velocity(x)
        x = cloud.domain.wrap(x + dt * v)
        v = v - (dt / tau_p) * (v - u)
        if record_every and (step + 1) % record_every == 0:
            history.append(ParticleCloud(cloud.domain, x.copy(), v.copy()))
    out = ParticleCloud(cloud.domain, x, v)
    if record_every:
        return out, history
    return out
