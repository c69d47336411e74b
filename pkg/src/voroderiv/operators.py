"""Finite-time differential operators on tessellated particle clouds.

The finite-time divergence of a particle's velocity field is estimated from
the relative change of its dual-cell volume between two instants separated by
dt.  Three difference schemes are provided; all agree to first order in dt:

- ``midpoint``: volume change over the midpoint volume,
  (2/dt) (V1 - V0) / (V1 + V0)
- ``linear``: volume change times the mean inverse volume,
  (1/(2 dt)) (1/V1 + 1/V0) (V1 - V0)
- ``log``: log-ratio, (1/dt) log(V1 / V0)

Curl and the full velocity-gradient tensor reduce to divergences of
transformed velocity fields.  With e_i the unit basis vectors:

- curl component i (3D) is the divergence measured after advecting with
  w = v x e_i; in 2D the single component uses w = (v_y, -v_x).
- gradient entry (i, j) is the divergence measured after advecting with
  w = v_i e_j, giving d v_i / d x_j.

The instantaneous (Eulerian) limits are evaluated per incident simplex in
flux form and aggregated with simplex-volume weights, which is exact for
linear velocity fields and equals the dt -> 0 limit of the finite-time
operator under frozen connectivity with the incident-simplex-sum dual.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .domain import Domain, ParticleCloud
from .dual_cells import DualCellField, default_dual_kind, dual_volumes
from .errors import InvariantViolationError
from .tessellation import Tessellation, build_delaunay

SCHEMES = ("midpoint", "linear", "log")
MODES = ("frozen_connectivity", "retessellate")
DEFAULT_MODE = "frozen_connectivity"

# Relative floor under which velocity/curl magnitudes make the relative
# helicity direction meaningless.
HELICITY_FLOOR_FACTOR = 1e-12


@dataclass
class OperatorField:
    """Per-particle operator values with a validity mask and provenance."""

    kind: str
    values: np.ndarray
    valid: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass
class TimePair:
    """Two realisations of a cloud separated by dt.

    ``cloud_k`` must carry velocities.  ``cloud_k1`` holds the positions at
    the later instant; for pairs built by Euler advection they satisfy
    x1 = wrap(x0 + dt v0).  Measured pairs (snapshots) instead define the
    velocities from the minimum-image displacement over dt.

    The default mode evaluates second-instant volumes on the first instant's
    connectivity (frozen).  Fully retessellating the advected cloud is
    available for sensitivity studies, but connectivity flips between the two
    instants then inject volume jumps of order the cell size, so the
    estimator noise grows like 1/dt as dt shrinks; frozen connectivity is
    what makes the finite-time operators converge.
    """

    cloud_k: ParticleCloud
    cloud_k1: ParticleCloud
    dt: float
    mode: str = DEFAULT_MODE
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.cloud_k.velocities is None:
            raise ValueError("cloud_k must carry velocities")
        if self.cloud_k1.n != self.cloud_k.n:
            raise ValueError("clouds must have matching particle counts")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @classmethod
    def from_snapshots(
        cls,
        cloud_k: ParticleCloud,
        cloud_k1: ParticleCloud,
        dt: float,
        mode: str = DEFAULT_MODE,
    ) -> "TimePair":
        """Pair two measured clouds matched by record order.

        The operator velocity is the minimum-image displacement over dt,
        which reproduces the internal advection pipeline exactly when the
        snapshots came from it.
        """
        disp = cloud_k.domain.minimum_image(
            cloud_k1.positions - cloud_k.positions
        )
        vel = disp / dt
        return cls(cloud_k.with_velocities(vel), cloud_k1, dt, mode)

    def tess_k(self) -> Tessellation:
        if "tess_k" not in self._cache:
            self._cache["tess_k"] = build_delaunay(self.cloud_k)
        return self._cache["tess_k"]

    def tess_k1(self) -> Tessellation:
        if "tess_k1" not in self._cache:
            self._cache["tess_k1"] = build_delaunay(self.cloud_k1)
        return self._cache["tess_k1"]


def advect_euler(
    cloud: ParticleCloud, dt: float, mode: str = DEFAULT_MODE
) -> TimePair:
    """Advance a cloud by one explicit Euler step and pair the instants."""
    if cloud.velocities is None:
        raise ValueError("cloud must carry velocities to advect")
    x1 = cloud.positions + dt * cloud.velocities
    x1 = cloud.domain.wrap(x1)
    return TimePair(cloud, ParticleCloud(cloud.domain, x1), dt, mode)


def _dual_k(tess: Tessellation, kind: str) -> DualCellField:
    key = ("dual", kind)
    if key not in tess._cache:
        tess._cache[key] = dual_volumes(tess, kind)
    return tess._cache[key]


def volume_pair(
    pair: TimePair,
    velocities: np.ndarray | None = None,
    dual_kind: str | None = None,
):
    """Dual volumes at both instants for the given advecting velocities.

    With ``velocities=None`` the pair's own second cloud provides the later
    instant; otherwise the first cloud is re-advected with the supplied
    velocities (used by curl and gradient components).  Returns
    (V0, V1, valid).
    """
    kind = dual_kind or default_dual_kind(pair.cloud_k.dim)
    tess0 = pair.tess_k()
    d0 = _dual_k(tess0, kind)

    if pair.mode == "frozen_connectivity":
        w = pair.cloud_k.velocities if velocities is None else velocities
        x1 = pair.cloud_k.positions + pair.dt * w  # unwrapped; ghosts follow
        d1 = dual_volumes(tess0, kind, points=tess0.advected_points(x1))
        return d0, d1, d0.valid & d1.valid

    if velocities is None:
        tess1 = pair.tess_k1()
    else:
        x1 = pair.cloud_k.domain.wrap(
            pair.cloud_k.positions + pair.dt * velocities
        )
        tess1 = build_delaunay(ParticleCloud(pair.cloud_k.domain, x1))
    d1 = _dual_k(tess1, kind)
    return d0, d1, d0.valid & d1.valid


def _scheme_rate(v0, v1, dt, scheme):
    with np.errstate(divide="ignore", invalid="ignore"):
        if scheme == "midpoint":
            return (2.0 / dt) * (v1 - v0) / (v1 + v0)
        if scheme == "linear":
            return (0.5 / dt) * (1.0 / v1 + 1.0 / v0) * (v1 - v0)
        if scheme == "log":
            return np.log(v1 / v0) / dt
    raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")


def _finalise(values, valid):
    valid = valid & np.all(np.isfinite(values.reshape(len(values), -1)), axis=1)
    values = values.copy()
    values[~valid] = np.nan
    return values, valid


def divergence_lagrangian(
    pair: TimePair,
    *,
    dual_kind: str | None = None,
    scheme: str = "midpoint",
) -> OperatorField:
    """Finite-time velocity divergence from dual-volume change."""
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    d0, d1, valid = volume_pair(pair, None, dual_kind)
    vals = _scheme_rate(d0.volumes, d1.volumes, pair.dt, scheme)
    vals, valid = _finalise(vals, valid)
    return OperatorField(
        "divergence", vals, valid,
        meta=dict(scheme=scheme, dual_kind=d0.kind, mode=pair.mode, dt=pair.dt),
    )


def curl_lagrangian(
    pair: TimePair,
    *,
    dual_kind: str | None = None,
    scheme: str = "midpoint",
) -> OperatorField:
    """Finite-time curl: divergence of rotated velocity fields.

    2D returns the scalar vorticity; 3D returns all three components, each
    from its own advection with w = v x e_i.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    v = pair.cloud_k.velocities
    dim = pair.cloud_k.dim
    if dim == 2:
        w = np.stack([v[:, 1], -v[:, 0]], axis=1)
        d0, d1, valid = volume_pair(pair, w, dual_kind)
        vals = _scheme_rate(d0.volumes, d1.volumes, pair.dt, scheme)
        vals, valid = _finalise(vals, valid)
    else:
        comps = []
        valid = None
        kind = dual_kind or default_dual_kind(dim)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1.0
            w = np.cross(v, e)
            d0, d1, ok = volume_pair(pair, w, kind)
            comps.append(_scheme_rate(d0.volumes, d1.volumes, pair.dt, scheme))
            valid = ok if valid is None else (valid & ok)
        vals = np.stack(comps, axis=1)
        vals, valid = _finalise(vals, valid)
        d0 = _dual_k(pair.tess_k(), kind)
    return OperatorField(
        "curl", vals, valid,
        meta=dict(scheme=scheme, dual_kind=d0.kind, mode=pair.mode, dt=pair.dt),
    )


def gradient_lagrangian(
    pair: TimePair,
    *,
    dual_kind: str | None = None,
    scheme: str = "midpoint",
) -> OperatorField:
    """Finite-time velocity-gradient tensor, entry (i, j) = d v_i / d x_j.

    Each entry is the divergence measured after advecting with w = v_i e_j,
    so one call performs dim**2 advections (re-tessellating each time unless
    the pair is frozen).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    v = pair.cloud_k.velocities
    dim = pair.cloud_k.dim
    kind = dual_kind or default_dual_kind(dim)
    n = pair.cloud_k.n
    vals = np.empty((n, dim, dim))
    valid = np.ones(n, dtype=bool)
    for i in range(dim):
        for j in range(dim):
            w = np.zeros((n, dim))
            w[:, j] = v[:, i]
            d0, d1, ok = volume_pair(pair, w, kind)
            vals[:, i, j] = _scheme_rate(d0.volumes, d1.volumes, pair.dt, scheme)
            valid &= ok
    vals, valid = _finalise(vals, valid)
    return OperatorField(
        "velocity_gradient", vals, valid,
        meta=dict(scheme=scheme, dual_kind=kind, mode=pair.mode, dt=pair.dt),
    )


# -- instantaneous (Eulerian) limits ---------------------------------------


def _euler_geometry(tess: Tessellation):
    """Per (vertex, incident simplex) flux geometry, cached.

    For each pair, the d companion vertices define edge vectors r_j from the
    particle; the returned tensor C[:, j, :] satisfies
    d(V)/dt = sum_j w_j . C_j for vertex velocities w_j relative to the
    particle, with V the (positive) simplex volume.
    """
    if "euler_geom" in tess._cache:
        return tess._cache["euler_geom"]
    from .dual_cells import _pair_vertices

    pv = _pair_vertices(tess)
    st = tess.inc_simplices
    verts = tess.simplices[st]
    keep = verts != pv[:, None]
    others = verts[keep].reshape(len(pv), tess.dim)
    r = tess.points[others] - tess.points[pv][:, None, :]
    if tess.dim == 2:
        c = np.empty_like(r)
        # dV/dt = w1 . rot(r2)/2 + w2 . rot(-r1)/2 with rot(a) = (a_y, -a_x)
        c[:, 0, 0] = r[:, 1, 1]
        c[:, 0, 1] = -r[:, 1, 0]
        c[:, 1, 0] = -r[:, 0, 1]
        c[:, 1, 1] = r[:, 0, 0]
        c *= 0.5
        vol = 0.5 * (r[:, 0, 0] * r[:, 1, 1] - r[:, 0, 1] * r[:, 1, 0])
    else:
        c = np.empty_like(r)
        c[:, 0, :] = np.cross(r[:, 1, :], r[:, 2, :])
        c[:, 1, :] = np.cross(r[:, 2, :], r[:, 0, :])
        c[:, 2, :] = np.cross(r[:, 0, :], r[:, 1, :])
        c /= 6.0
        vol = np.einsum("pd,pd->p", r[:, 0, :], c[:, 0, :])
    neg = vol < 0
    vol = np.abs(vol)
    c[neg] *= -1.0
    geom = (pv, others, c, vol)
    tess._cache["euler_geom"] = geom
    return geom


def _euler_flux_tensor(tess: Tessellation, velocities: np.ndarray):
    """Volume-weighted mean velocity gradient over each vertex star."""
    pv, others, c, vol = _euler_geometry(tess)
    vel = np.asarray(velocities)
    w = vel[tess.src[others]] - vel[pv][:, None, :]
    n, dim = tess.n_primary, tess.dim
    vsum = np.bincount(pv, weights=vol, minlength=n)
    g = np.empty((n, dim, dim))
    flux = np.einsum("pja,pjb->pab", w, c)
    for a in range(dim):
        for b in range(dim):
            g[:, a, b] = np.bincount(pv, weights=flux[:, a, b], minlength=n)
    with np.errstate(divide="ignore", invalid="ignore"):
        g /= vsum[:, None, None]
    valid = tess.interior & (vsum > 0)
    return g, valid


def divergence_eulerian(tess: Tessellation, velocities: np.ndarray) -> OperatorField:
    """Instantaneous divergence: flux form per incident simplex, aggregated
    with simplex-volume weights.  Exact for linear velocity fields."""
    pv, others, c, vol = _euler_geometry(tess)
    vel = np.asarray(velocities)
    w = vel[tess.src[others]] - vel[pv][:, None, :]
    f = np.einsum("pjd,pjd->p", w, c)
    n = tess.n_primary
    num = np.bincount(pv, weights=f, minlength=n)
    den = np.bincount(pv, weights=vol, minlength=n)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = num / den
    vals, valid = _finalise(vals, tess.interior & (den > 0))
    return OperatorField("divergence", vals, valid, meta=dict(scheme="eulerian"))


def gradient_eulerian(tess: Tessellation, velocities: np.ndarray) -> OperatorField:
    g, valid = _euler_flux_tensor(tess, velocities)
    vals, valid = _finalise(g, valid)
    return OperatorField("velocity_gradient", vals, valid, meta=dict(scheme="eulerian"))


def curl_eulerian(tess: Tessellation, velocities: np.ndarray) -> OperatorField:
    g, valid = _euler_flux_tensor(tess, velocities)
    if tess.dim == 2:
        vals = g[:, 1, 0] - g[:, 0, 1]
    else:
        vals = np.stack(
            [
                g[:, 2, 1] - g[:, 1, 2],
                g[:, 0, 2] - g[:, 2, 0],
                g[:, 1, 0] - g[:, 0, 1],
            ],
            axis=1,
        )
    vals, valid = _finalise(vals, valid)
    return OperatorField("curl", vals, valid, meta=dict(scheme="eulerian"))


# -- interpolated Green-Gauss gradient (2D) ---------------------------------


def _barycentric_2d(points, simplices, targets, tri_ids):
    """Barycentric coordinates of targets in the given triangles."""
    verts = points[simplices[tri_ids]]
    d1 = verts[:, 1, :] - verts[:, 0, :]
    d2 = verts[:, 2, :] - verts[:, 0, :]
    rhs = targets - verts[:, 0, :]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = (rhs[:, 0] * d2[:, 1] - rhs[:, 1] * d2[:, 0]) / det
        l2 = (d1[:, 0] * rhs[:, 1] - d1[:, 1] * rhs[:, 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=1)


def _locate_2d(tess: Tessellation, targets: np.ndarray, hints: np.ndarray):
    """Walk from hint triangles to the triangles containing the targets.

    Returns (tri_ids, bary, found).  Unlocated targets (walked off the
    tessellation or cycled) are flagged rather than raising.
    """
    tol = -1e-10
    tri = hints.astype(np.int64).copy()
    bary = _barycentric_2d(tess.points, tess.simplices, targets, tri)
    pending = ~(bary > tol).all(axis=1) | ~np.isfinite(bary).all(axis=1)
    found = ~pending
    if pending.any():
        nb = tess.neighbors
        idx = np.nonzero(pending)[0]
        for _ in range(64):
            b = _barycentric_2d(tess.points, tess.simplices, targets[idx], tri[idx])
            ok = (b > tol).all(axis=1) & np.isfinite(b).all(axis=1)
            bary[idx[ok]] = b[ok]
            found[idx[ok]] = True
            idx = idx[~ok]
            if idx.size == 0:
                break
            b = b[~ok]
            b[~np.isfinite(b)] = -np.inf
            step = nb[tri[idx], np.argmin(b, axis=1)]
            dead = step < 0
            found[idx[dead]] = False
            idx = idx[~dead]
            if idx.size == 0:
                break
            tri[idx] = step[~dead]
    return tri, bary, found


def gradient_green_gauss_2d(
    tess: Tessellation, velocities: np.ndarray
) -> OperatorField:
    """Velocity gradient from a surface integral over the centroid-dual cell.

    Edge-average velocities are interpolated barycentrically at the edge
    midpoints of the centroid polygon; the Green-Gauss sum of
    (mean velocity) x (outward edge normal) over the closed polygon divided
    by the cell area is exact for linear velocity fields.
    """
    if tess.dim != 2:
        raise ValueError("Green-Gauss interpolated gradient is 2D only")
    from .dual_cells import _pair_vertices, _ring_next

    vel = np.asarray(velocities)
    pv = _pair_vertices(tess)
    nxt = _ring_next(tess)
    cents = tess.centroids()
    g0 = cents[tess.inc_simplices]
    g1 = g0[nxt]
    mid = 0.5 * (g0 + g1)

    tri, bary, found = _locate_2d(tess, mid, tess.inc_simplices)
    tri_vel = vel[tess.src[tess.simplices[tri]]]
    umid = np.einsum("pj,pjd->pd", bary, tri_vel)

    edge = g1 - g0
    n_out = np.stack([edge[:, 1], -edge[:, 0]], axis=1)  # outward for CCW ring
    flux = umid[:, :, None] * n_out[:, None, :]

    n = tess.n_primary
    g = np.empty((n, 2, 2))
    for a in range(2):
        for b in range(2):
            g[:, a, b] = np.bincount(pv, weights=flux[:, a, b], minlength=n)
    area = np.bincount(
        pv,
        weights=0.5 * (g0[:, 0] * g1[:, 1] - g0[:, 1] * g1[:, 0]),
        minlength=n,
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        g /= area[:, None, None]
    located = np.ones(n, dtype=bool)
    np.logical_and.at(located, pv, found)
    vals, valid = _finalise(g, tess.interior & located & (area > 0))
    return OperatorField(
        "velocity_gradient", vals, valid, meta=dict(scheme="green_gauss")
    )


# -- relative helicity -------------------------------------------------------


def relative_helicity(
    velocities: np.ndarray, curl: OperatorField
) -> OperatorField:
    """Cosine of the angle between velocity and curl (3D).

    Particles where either magnitude falls below 1e-12 times its RMS over
    valid particles are flagged invalid: the direction is noise there.
    """
    vel = np.asarray(velocities, dtype=float)
    if vel.ndim != 2 or vel.shape[1] != 3:
        raise ValueError("relative helicity requires 3D velocities")
    if curl.values.ndim != 2 or curl.values.shape[1] != 3:
        raise ValueError("relative helicity requires a 3D curl field")
    c = curl.values
    nv = np.linalg.norm(vel, axis=1)
    nc = np.where(curl.valid, np.linalg.norm(c, axis=1), np.nan)
    base = curl.valid
    rms_v = np.sqrt(np.mean(nv[base] ** 2)) if base.any() else 0.0
    rms_c = np.sqrt(np.nanmean(nc[base] ** 2)) if base.any() else 0.0
    valid = (
        base
        & (nv > HELICITY_FLOOR_FACTOR * rms_v)
        & (nc > HELICITY_FLOOR_FACTOR * rms_c)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.einsum("pd,pd->p", vel, c) / (nv * nc)
    h = np.clip(h, -1.0, 1.0)
    vals, valid = _finalise(h, valid)
    return OperatorField(
        "relative_helicity", vals, valid, meta=dict(curl_meta=dict(curl.meta))
    )
