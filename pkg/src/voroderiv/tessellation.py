"""Delaunay tessellation of particle clouds with periodic ghost handling.

A tessellation is built over an extended point set: the N primary particles
plus ghost copies of every particle whose periodic image falls within a margin
band around the box.  Simplices are canonicalised (ascending vertex indices,
positive orientation, lexicographically sorted rows) so that identical input
produces identical output, and each simplex of the underlying torus
tessellation is *owned* by exactly one of its periodic copies.

The ghost margin starts at max(6*delta, L/16) and doubles until every simplex
incident to a primary vertex has its circumscribed ball inside the extended
slab; emptiness of such a ball within the extended set then implies emptiness
in the infinite periodic set, so the tessellation restricted to
primary-incident simplices matches the true periodic Delaunay tessellation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.spatial import Delaunay as _Delaunay
from scipy.spatial import QhullError

from .domain import Domain, ParticleCloud
from .errors import (
    DegenerateInputError,
    InvariantViolationError,
    TooFewPointsError,
)

# Relative (to L^dim/N) volume below which a simplex is treated as a sliver
# artifact of floating-point cocircularity and dropped.
VOLUME_FLOOR_FACTOR = 1e-14
# circumradius / shortest edge above this is flagged near-degenerate.
ASPECT_FLAG_THRESHOLD = 1e4
# Tolerance for the tiling and partition invariants.
PARTITION_RTOL = 1e-9


def signed_simplex_volumes(points: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    """Signed volumes of simplices (area in 2D, volume in 3D)."""
    dim = points.shape[1]
    verts = points[simplices]
    edges = verts[:, 1:, :] - verts[:, :1, :]
    if dim == 2:
        return 0.5 * (
            edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0]
        )
    d1, d2, d3 = edges[:, 0, :], edges[:, 1, :], edges[:, 2, :]
    return (
        d1[:, 0] * (d2[:, 1] * d3[:, 2] - d2[:, 2] * d3[:, 1])
        - d1[:, 1] * (d2[:, 0] * d3[:, 2] - d2[:, 2] * d3[:, 0])
        + d1[:, 2] * (d2[:, 0] * d3[:, 1] - d2[:, 1] * d3[:, 0])
    ) / 6.0


def circumcenters(points: np.ndarray, simplices: np.ndarray):
    """Circumcenters and circumradii of simplices, vectorised.

    Solves M c = r with rows M_j = x_j - x_0 and r_j = |x_j - x_0|^2 / 2
    via explicit 2x2 / 3x3 inverses.  Degenerate simplices produce inf.
    """
    dim = points.shape[1]
    verts = points[simplices]
    a = verts[:, 0, :]
    e = verts[:, 1:, :] - verts[:, :1, :]
    rhs = 0.5 * np.einsum("sjd,sjd->sj", e, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        if dim == 2:
            d1, d2 = e[:, 0, :], e[:, 1, :]
            det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
            cx = (d2[:, 1] * rhs[:, 0] - d1[:, 1] * rhs[:, 1]) / det
            cy = (-d2[:, 0] * rhs[:, 0] + d1[:, 0] * rhs[:, 1]) / det
            rel = np.stack([cx, cy], axis=1)
        else:
            d1, d2, d3 = e[:, 0, :], e[:, 1, :], e[:, 2, :]
            c23 = np.cross(d2, d3)
            c31 = np.cross(d3, d1)
            c12 = np.cross(d1, d2)
            det = np.einsum("sd,sd->s", d1, c23)
            rel = (
                rhs[:, 0, None] * c23 + rhs[:, 1, None] * c31 + rhs[:, 2, None] * c12
            ) / det[:, None]
    centers = a + rel
    radii = np.sqrt(np.einsum("sd,sd->s", rel, rel))
    return centers, radii


@dataclass
class SimplexMeasures:
    """Per-simplex geometry: volumes, centroids, circumcenters, quality flags."""

    volumes: np.ndarray
    centroids: np.ndarray
    circumcenters: np.ndarray
    circumradii: np.ndarray
    near_degenerate: np.ndarray  # circumradius / min edge > threshold


@dataclass
class Tessellation:
    """Delaunay tessellation of the extended (primary + ghost) point set."""

    domain: Domain
    n_primary: int
    points: np.ndarray          # (M, dim) extended coordinates, primaries first
    src: np.ndarray             # (M,) primary index of each extended point
    shifts: np.ndarray          # (M, dim) int8 lattice shift in units of L
    simplices: np.ndarray       # (S, dim+1) canonical vertex rows
    volumes: np.ndarray         # (S,) positive simplex volumes
    owned: np.ndarray           # (S,) bool, one True copy per torus simplex
    margin: float
    inc_offsets: np.ndarray     # (N+1,) CSR offsets into inc_simplices
    inc_simplices: np.ndarray   # incident simplex ids per primary vertex
    interior: np.ndarray        # (N,) bool, vertex star closed
    _neighbors: np.ndarray | None = field(default=None, repr=False)
    _centroids: np.ndarray | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    # -- basic accessors ---------------------------------------------------

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_simplices(self) -> int:
        return self.simplices.shape[0]

    def incident(self, p: int) -> np.ndarray:
        """Simplex ids incident to primary vertex p (angular order in 2D)."""
        return self.inc_simplices[self.inc_offsets[p]:self.inc_offsets[p + 1]]

    def extend_values(self, values: np.ndarray) -> np.ndarray:
        """Replicate per-primary values onto the extended point set."""
        return np.asarray(values)[self.src]

    def advected_points(self, new_primary: np.ndarray) -> np.ndarray:
        """Extended coordinates with primaries moved and ghosts following.

        Used by frozen-connectivity measurements: connectivity (simplices,
        rings) stays fixed while coordinates are re-realised.
        """
        new_primary = np.asarray(new_primary, dtype=float)
        return new_primary[self.src] + self.shifts * self.domain.length

    def centroids(self) -> np.ndarray:
        if self._centroids is None:
            self._centroids = self.points[self.simplices].mean(axis=1)
        return self._centroids

    def measures(self) -> SimplexMeasures:
        if "measures" not in self._cache:
            centers, radii = circumcenters(self.points, self.simplices)
            verts = self.points[self.simplices]
            dp1 = self.dim + 1
            min_edge = np.full(self.n_simplices, np.inf)
            for i in range(dp1):
                for j in range(i + 1, dp1):
                    d = np.linalg.norm(verts[:, i, :] - verts[:, j, :], axis=1)
                    np.minimum(min_edge, d, out=min_edge)
            with np.errstate(divide="ignore", invalid="ignore"):
                aspect = radii / min_edge
            flags = ~np.isfinite(aspect) | (aspect > ASPECT_FLAG_THRESHOLD)
            self._cache["measures"] = SimplexMeasures(
                volumes=self.volumes,
                centroids=self.centroids(),
                circumcenters=centers,
                circumradii=radii,
                near_degenerate=flags,
            )
        return self._cache["measures"]

    @property
    def neighbors(self) -> np.ndarray:
        """(S, dim+1) neighbor simplex opposite each vertex, -1 at boundary."""
        if self._neighbors is None:
            self._neighbors = _facet_neighbors(self.simplices)
        return self._neighbors


def _facet_neighbors(simplices: np.ndarray) -> np.ndarray:
    ns, dp1 = simplices.shape
    dim = dp1 - 1
    faces = np.empty((ns, dp1, dim), dtype=simplices.dtype)
    cols = np.arange(dp1)
    for j in range(dp1):
        faces[:, j, :] = np.sort(simplices[:, cols != j], axis=1)
    flat = faces.reshape(ns * dp1, dim)
    order = np.lexsort(tuple(flat[:, c] for c in reversed(range(dim))))
    srt = flat[order]
    same = np.all(srt[1:] == srt[:-1], axis=1)
    nb = np.full((ns * dp1,), -1, dtype=np.int64)
    left, right = order[:-1][same], order[1:][same]
    nb[left] = right // dp1
    nb[right] = left // dp1
    return nb.reshape(ns, dp1)


def _extended_set(cloud: ParticleCloud, margin: float):
    """Primary points plus periodic ghost copies within the margin bands."""
    dom = cloud.domain
    pos = cloud.positions
    n, dim = pos.shape
    lo = dom.lo_array()
    length = dom.length
    pts = [pos]
    srcs = [np.arange(n, dtype=np.int64)]
    shifts = [np.zeros((n, dim), dtype=np.int8)]
    axis_shifts = [(-1, 0, 1) if p else (0,) for p in dom.periodic]
    for combo in product(*axis_shifts):
        if all(s == 0 for s in combo):
            continue
        mask = np.ones(n, dtype=bool)
        for ax, s in enumerate(combo):
            if s == 1:
                # shifted +L lands in the right margin, so source is the left band
                mask &= pos[:, ax] <= lo[ax] + margin
            elif s == -1:
                mask &= pos[:, ax] >= lo[ax] + length - margin
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            continue
        shift = np.array(combo, dtype=np.int8)
        pts.append(pos[idx] + shift.astype(float) * length)
        srcs.append(idx)
        shifts.append(np.broadcast_to(shift, (idx.size, dim)).copy())
    return np.vstack(pts), np.concatenate(srcs), np.vstack(shifts)


def _ownership(simplices, src, shifts, dim):
    """One owned copy per torus simplex.

    Vertex keys (src, shift) are compared lexicographically; the comparison is
    invariant under a global shift of the simplex, so every periodic copy
    elects the same vertex, and the copy where that vertex sits in the primary
    box (shift == 0) is the owner.
    """
    base = 3 ** dim
    code = np.zeros(len(src), dtype=np.int64)
    for ax in range(dim):
        code = code * 3 + (shifts[:, ax].astype(np.int64) + 1)
    center = (base - 1) // 2  # code of the all-zero shift
    key = src.astype(np.int64) * base + code
    keys = key[simplices]
    argmin = np.argmin(keys, axis=1)
    winner = simplices[np.arange(len(simplices)), argmin]
    return code[winner] == center


def build_delaunay(
    cloud: ParticleCloud,
    *,
    margin: float | None = None,
    check: bool = True,
) -> Tessellation:
    """Tessellate a particle cloud, handling periodic axes by ghost copies.

    Raises TooFewPointsError for N < dim+1, DegenerateInputError when the
    cloud has no full-dimensional tessellation, and InvariantViolationError
    when the owned simplices fail to tile the torus (fully periodic domains,
    ``check=True``).
    """
    dom = cloud.domain
    n, dim = cloud.n, cloud.dim
    if n < dim + 1:
        raise TooFewPointsError(f"need at least {dim + 1} points, got {n}")
    pos = dom.wrap(cloud.positions) if dom.any_periodic else cloud.positions

    length = dom.length
    m = margin if margin is not None else max(6.0 * cloud.delta, length / 16.0)
    m = min(m, length)

    wrapped = ParticleCloud(dom, pos, None)
    lo = dom.lo_array()
    floor = VOLUME_FLOOR_FACTOR * dom.volume / n

    while True:
        points, src, shifts = _extended_set(wrapped, m)
        try:
            dela = _Delaunay(points)
        except QhullError as exc:
            raise DegenerateInputError(
                f"no full-dimensional tessellation exists: {exc}"
            ) from exc
        raw = dela.simplices.astype(np.int64)
        hull_vertices = np.unique(dela.convex_hull)
        del dela

        simp = np.sort(raw, axis=1)
        vol = signed_simplex_volumes(points, simp)
        flip = vol < 0
        tmp = simp[flip, dim].copy()
        simp[flip, dim] = simp[flip, dim - 1]
        simp[flip, dim - 1] = tmp
        vol = np.abs(vol)
        keep = vol >= floor
        simp, vol = simp[keep], vol[keep]
        order = np.lexsort(tuple(simp[:, c] for c in reversed(range(dim + 1))))
        simp, vol = simp[order], vol[order]

        if not dom.any_periodic:
            break
        # circumballs of primary-incident simplices must stay inside the slab
        inc_primary = (simp < n).any(axis=1)
        centers, radii = circumcenters(points, simp[inc_primary])
        ok = np.isfinite(radii).all()
        if ok:
            for ax in range(dim):
                if not dom.periodic[ax]:
                    continue
                if (centers[:, ax] - radii < lo[ax] - m).any() or (
                    centers[:, ax] + radii > lo[ax] + length + m
                ).any():
                    ok = False
                    break
        if ok:
            break
        if m >= length:
            raise InvariantViolationError(
                "ghost margin: circumballs exceed full 3^dim replication"
            )
        m = min(2.0 * m, length)

    owned = _ownership(simp, src, shifts, dim) if dom.any_periodic else np.ones(
        len(simp), dtype=bool
    )

    # vertex-star incidence for primary vertices, angularly ordered in 2D
    flat = simp.ravel()
    pair_s = np.repeat(
        np.arange(len(simp), dtype=np.int64), dim + 1
    )
    pmask = flat < n
    pair_v = flat[pmask]
    pair_s = pair_s[pmask]
    if dim == 2:
        cents = points[simp].mean(axis=1)
        rel = cents[pair_s] - points[pair_v]
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        order = np.lexsort((ang, pair_v))
    else:
        order = np.argsort(pair_v, kind="stable")
    pair_v, pair_s = pair_v[order], pair_s[order]
    counts = np.bincount(pair_v, minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])

    on_hull = np.zeros(len(points), dtype=bool)
    on_hull[hull_vertices] = True
    interior = ~on_hull[:n] & (counts > 0)

    tess = Tessellation(
        domain=dom,
        n_primary=n,
        points=points,
        src=src,
        shifts=shifts,
        simplices=simp,
        volumes=vol,
        owned=owned,
        margin=m,
        inc_offsets=offsets,
        inc_simplices=pair_s,
        interior=interior,
    )

    if check and dom.any_periodic and all(dom.periodic):
        total = float(tess.volumes[tess.owned].sum())
        if abs(total - dom.volume) > PARTITION_RTOL * dom.volume:
            raise InvariantViolationError(
                f"owned simplex volumes do not tile the box: "
                f"sum={total!r}, expected={dom.volume!r}"
            )
        if dim == 2 and int(tess.owned.sum()) != 2 * n:
            raise InvariantViolationError(
                f"torus triangle count: got {int(tess.owned.sum())}, "
                f"expected {2 * n}"
            )
    return tess
