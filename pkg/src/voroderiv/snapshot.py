"""Binary particle-snapshot I/O.

Layout (all little-endian), version 1:

    offset  size   field
    0       4      magic  b"VDSN"
    4       2      format version, uint16
    6       1      dimension d, uint8 (2 or 3)
    7       1      periodicity bitmask, uint8 (bit i set = axis i periodic)
    8       8      particle count N, uint64
    16      8      box edge length, float64
    24      32     nu, eps, tau_p, timestamp, float64 each (NaN = absent)
    56      8*d    box lower corner, float64
    56+8d   16*d*N records: per particle, position (d) then velocity (d)

The lower corner is stored in addition to the edge length so that a
snapshot round-trips any box placement losslessly.  Positions on periodic
axes are wrapped into the box on write.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .domain import Domain, ParticleCloud
from .errors import SnapshotFormatError

MAGIC = b"VDSN"
VERSION = 1
_HEAD = struct.Struct("<4sHBBQ5d")  # through timestamp; lower corner follows


@dataclass
class SnapshotMeta:
    nu: float | None = None
    eps: float | None = None
    tau_p: float | None = None
    timestamp: float | None = None


def _opt(x) -> float:
    return np.nan if x is None else float(x)


def _unopt(x: float):
    return None if np.isnan(x) else float(x)


def write_snapshot(path, cloud: ParticleCloud, meta: SnapshotMeta | None = None) -> None:
    meta = meta or SnapshotMeta()
    dom = cloud.domain
    mask = 0
    for ax, per in enumerate(dom.periodic):
        if per:
            mask |= 1 << ax
    pos = dom.wrap(cloud.positions)
    vel = cloud.velocities
    if vel is None:
        vel = np.zeros_like(pos)
    records = np.hstack([pos, vel]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(
            _HEAD.pack(
                MAGIC,
                VERSION,
                dom.dim,
                mask,
                cloud.n,
                dom.length,
                _opt(meta.nu),
                _opt(meta.eps),
                _opt(meta.tau_p),
                _opt(meta.timestamp),
            )
        )
        fh.write(np.asarray(dom.lo_array(), dtype="<f8").tobytes())
        fh.write(records.tobytes())


def read_snapshot(path):
    """Read a snapshot; returns (ParticleCloud, SnapshotMeta)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEAD.size:
        raise SnapshotFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, dim, mask, n, length, nu, eps, tau_p, ts = _HEAD.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}")
    if dim not in (2, 3):
        raise SnapshotFormatError(f"{path}: bad dimension {dim}")
    if not (np.isfinite(length) and length > 0):
        raise SnapshotFormatError(f"{path}: bad box length {length}")
    expect = _HEAD.size + 8 * dim + 16 * dim * n
    if len(raw) != expect:
        raise SnapshotFormatError(
            f"{path}: size {len(raw)} != expected {expect} for N={n}, d={dim}"
        )
    lo = np.frombuffer(raw, dtype="<f8", count=dim, offset=_HEAD.size)
    records = np.frombuffer(
        raw, dtype="<f8", count=2 * dim * n, offset=_HEAD.size + 8 * dim
    ).reshape(n, 2 * dim)
    if not np.all(np.isfinite(records)):
        raise SnapshotFormatError(f"{path}: non-finite record data")
    periodic = tuple(bool(mask >> ax & 1) for ax in range(dim))
    dom = Domain(dim=dim, length=float(length), lo=tuple(lo), periodic=periodic)
    cloud = ParticleCloud(
        dom, records[:, :dim].copy(), records[:, dim:].copy()
    )
    return cloud, SnapshotMeta(_unopt(nu), _unopt(eps), _unopt(tau_p), _unopt(ts))


def read_snapshot_pair(path_k, path_k1):
    """Read two matched snapshots; particle identities follow record order."""
    cloud_k, meta_k = read_snapshot(path_k)
    cloud_k1, _ = read_snapshot(path_k1)
    if cloud_k.n != cloud_k1.n:
        raise SnapshotFormatError(
            f"snapshot pair mismatch: {path_k} has N={cloud_k.n}, "
            f"{path_k1} has N={cloud_k1.n}"
        )
    if cloud_k.domain != cloud_k1.domain:
        raise SnapshotFormatError("snapshot pair mismatch: different domains")
    return cloud_k, cloud_k1, meta_k
