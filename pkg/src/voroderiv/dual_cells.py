"""Dual-cell volumes around each particle of a tessellation.

Three duals are supported:

- ``classic_circumcenter``: polygon/polyhedron of circumcenters of the
  simplices incident to the particle (the classic Voronoi cell).
- ``modified_centroid``: same connectivity but with simplex centroids as
  generating vertices.  In 3D the cell faces (one per Delaunay edge) are
  non-planar and are fan-triangulated about their vertex mean; signed fan
  volumes keep the partition of unity exact even for nonconvex cells.
- ``incident_simplex_sum``: sum of the volumes of the incident simplices.
  Cheapest by far; cells overlap, so volumes sum to (dim+1) times the box.

Every evaluator accepts an optional ``points`` override carrying re-realised
extended coordinates.  This is how frozen-connectivity measurements work: the
ring topology captured at build time is reused while the generating vertices
move with the particles.

Defaults: ``modified_centroid`` in 2D, ``incident_simplex_sum`` in 3D.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tessellation import Tessellation, circumcenters, signed_simplex_volumes

KINDS = ("classic_circumcenter", "modified_centroid", "incident_simplex_sum")


def default_dual_kind(dim: int) -> str:
    return "modified_centroid" if dim == 2 else "incident_simplex_sum"


@dataclass
class DualCellField:
    """Per-particle dual-cell volumes with a validity mask."""

    kind: str
    volumes: np.ndarray
    valid: np.ndarray

    @property
    def n(self) -> int:
        return self.volumes.shape[0]


def _pair_vertices(tess: Tessellation) -> np.ndarray:
    """Primary vertex id for every (vertex, incident simplex) pair."""
    if "pair_vertices" not in tess._cache:
        counts = np.diff(tess.inc_offsets)
        tess._cache["pair_vertices"] = np.repeat(
            np.arange(tess.n_primary, dtype=np.int64), counts
        )
    return tess._cache["pair_vertices"]


def _ring_next(tess: Tessellation) -> np.ndarray:
    """Successor index within each vertex-star segment, wrapping around."""
    if "ring_next" not in tess._cache:
        offs = tess.inc_offsets
        nxt = np.arange(1, offs[-1] + 1, dtype=np.int64)
        nxt[offs[1:] - 1] = offs[:-1]
        tess._cache["ring_next"] = nxt
    return tess._cache["ring_next"]


def _generators(tess, kind, points):
    if kind == "modified_centroid":
        if points is tess.points:
            return tess.centroids()
        return points[tess.simplices].mean(axis=1)
    centers, _ = circumcenters(points, tess.simplices)
    return centers


def _volumes_ring_2d(tess: Tessellation, kind: str, points: np.ndarray):
    """Shoelace areas of the dual polygons around each particle."""
    gen = _generators(tess, kind, points)
    pv = _pair_vertices(tess)
    nxt = _ring_next(tess)
    g = gen[tess.inc_simplices]
    x = points[pv]
    a = g - x
    b = g[nxt] - x
    contrib = 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    vols = np.bincount(pv, weights=contrib, minlength=tess.n_primary)
    return vols


def _edge_rings(tess: Tessellation):
    """Per-Delaunay-edge rings of incident tetrahedra (3D, cached).

    For every edge (p, q) with p primary, the tetrahedra sharing the edge are
    ordered counterclockwise about the edge axis as seen from p, using the
    build-time coordinates.  Frozen-connectivity evaluations reuse the order.

    Returns (pair_p, pair_tet, ring_next, ring_id) where pair_* are flattened
    over all rings, ring_next is the cyclic successor within each ring, and
    ring_id maps each pair to its ring for face-mean accumulation.
    """
    if "edge_rings" in tess._cache:
        return tess._cache["edge_rings"]
    pv = _pair_vertices(tess)
    st = tess.inc_simplices
    verts = tess.simplices[st]                       # (P, 4)
    keep = verts != pv[:, None]
    eq = verts[keep].reshape(-1)                      # 3 other vertices per pair
    ep = np.repeat(pv, 3)
    et = np.repeat(st, 3)

    pts = tess.points
    u = pts[eq] - pts[ep]
    # frame perpendicular to the edge axis; helper axis least aligned with u
    helper = np.zeros_like(u)
    helper[np.arange(len(u)), np.argmin(np.abs(u), axis=1)] = 1.0
    e1 = np.cross(u, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(u, e1)
    e2 /= np.linalg.norm(e2, axis=1, keepdims=True)
    cent = tess.centroids()[et]
    rel = cent - pts[ep]
    ang = np.arctan2(np.einsum("pd,pd->p", rel, e2), np.einsum("pd,pd->p", rel, e1))
    order = np.lexsort((ang, eq, ep))
    ep, eq, et = ep[order], eq[order], et[order]

    edge_change = np.empty(len(ep), dtype=bool)
    edge_change[0] = True
    edge_change[1:] = (ep[1:] != ep[:-1]) | (eq[1:] != eq[:-1])
    ring_id = np.cumsum(edge_change) - 1
    starts = np.nonzero(edge_change)[0]
    ends = np.append(starts[1:], len(ep)) - 1
    nxt = np.arange(1, len(ep) + 1, dtype=np.int64)
    nxt[ends] = starts

    rings = (ep, et, nxt, ring_id, starts)
    tess._cache["edge_rings"] = rings
    return rings


def _volumes_ring_3d(tess: Tessellation, kind: str, points: np.ndarray):
    """Signed fan volumes of the dual polyhedra around each particle.

    Each Delaunay edge from p contributes one face; faces are triangulated
    about their vertex mean and the tetrahedra (p, mean, g_i, g_{i+1}) are
    accumulated with sign, so the result is exact for nonconvex cells.
    """
    gen = _generators(tess, kind, points)
    ep, et, nxt, ring_id, starts = _edge_rings(tess)
    g = gen[et]
    counts = np.bincount(ring_id)
    gbar = np.zeros((len(starts), 3))
    for c in range(3):
        gbar[:, c] = np.bincount(ring_id, weights=g[:, c])
    gbar /= counts[:, None]
    x = points[ep]
    a = gbar[ring_id] - x
    b = g - x
    c = g[nxt] - x
    contrib = (
        a[:, 0] * (b[:, 1] * c[:, 2] - b[:, 2] * c[:, 1])
        - a[:, 1] * (b[:, 0] * c[:, 2] - b[:, 2] * c[:, 0])
        + a[:, 2] * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    ) / 6.0
    vols = np.bincount(ep, weights=contrib, minlength=tess.n_primary)
    return vols


def dual_volumes(
    tess: Tessellation,
    kind: str | None = None,
    points: np.ndarray | None = None,
) -> DualCellField:
    """Dual-cell volumes of every primary particle.

    ``points`` overrides the extended coordinates (frozen-connectivity mode);
    by default the build-time coordinates are used.  Cells whose vertex star
    is not closed, or whose computed volume is not positive, are invalid.
    """
    if kind is None:
        kind = default_dual_kind(tess.dim)
    if kind not in KINDS:
        raise ValueError(f"unknown dual kind {kind!r}; expected one of {KINDS}")
    if points is None:
        points = tess.points

    if kind == "incident_simplex_sum":
        if points is tess.points:
            svol = tess.volumes
        else:
            svol = np.abs(signed_simplex_volumes(points, tess.simplices))
        pv = _pair_vertices(tess)
        vols = np.bincount(
            pv, weights=svol[tess.inc_simplices], minlength=tess.n_primary
        )
    elif tess.dim == 2:
        vols = _volumes_ring_2d(tess, kind, points)
    else:
        vols = _volumes_ring_3d(tess, kind, points)

    valid = tess.interior & (vols > 0.0) & np.isfinite(vols)
    return DualCellField(kind=kind, volumes=vols, valid=valid)
