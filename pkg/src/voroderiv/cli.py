"""Command-line interface.

Subcommands:
    tessellate   build a tessellation and write per-particle dual volumes
    operators    finite-time operators from two measured snapshots
    convergence  run a convergence-family experiment config
    correlate    run a correlation-family experiment config
    stats        run the turbulence-statistics pipeline config
    synth-field  generate snapshot(s) sampled from a synthetic spectrum
    ingest       validate snapshot files and print their headers

Global flags --seed/--threads/--out fall back to the VORODERIV_SEED /
VORODERIV_THREADS environment variables, then to the config file (where one
is involved).  Exit codes: 0 success, 2 configuration/usage error, 3 data
format error, 4 numerical invariant violation.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import experiments
from .domain import Domain, ParticleCloud
from .dual_cells import KINDS as DUAL_KINDS, default_dual_kind, dual_volumes
from .errors import (
    ConfigError,
    InvariantViolationError,
    SnapshotFormatError,
    VoroderivError,
)
from .fields import SyntheticSpectrumField, sample_velocities, seed_uniform
from .operators import (
    DEFAULT_MODE,
    MODES,
    SCHEMES,
    TimePair,
    curl_lagrangian,
    divergence_lagrangian,
    relative_helicity,
)
from .snapshot import SnapshotMeta, read_snapshot, read_snapshot_pair, write_snapshot
from .tessellation import build_delaunay


def _env_int(name: str):
    raw = os.environ.get(name, "").strip()
    return int(raw) if raw else None


def _resolve(flag, env_name, fallback):
    if flag is not None:
        return flag
    env = _env_int(env_name)
    return env if env is not None else fallback


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed")
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    p.add_argument("--out", default=None, help="output directory")


def _out_dir(args) -> str:
    out = args.out if args.out is not None else "."
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_tessellate(args) -> int:
    seed = _resolve(args.seed, "VORODERIV_SEED", 0)
    if args.input:
        cloud, _ = read_snapshot(args.input)
    else:
        if not args.n:
            raise ConfigError("tessellate needs --input or --dim/--n")
        cloud = seed_uniform(Domain.periodic_box(args.dim), args.n, seed=seed)
    tess = build_delaunay(cloud)
    dual = args.dual or default_dual_kind(cloud.dim)
    cells = dual_volumes(tess, dual)
    out = _out_dir(args)
    path = os.path.join(out, "tessellate.csv")
    with open(path, "w") as fh:
        fh.write("index,volume,valid\n")
        for i in range(cells.n):
            fh.write(f"{i},{float(cells.volumes[i])!r},{int(cells.valid[i])}\n")
    total = float(cells.volumes[cells.valid].sum())
    print(
        f"tessellated N={cloud.n} d={cloud.dim} simplices={tess.owned.sum()} "
        f"dual={dual} valid={int(cells.valid.sum())} volume_sum={total!r} -> {path}"
    )
    return 0


def _cmd_operators(args) -> int:
    cloud_k, cloud_k1, _ = read_snapshot_pair(args.snapshot_k, args.snapshot_k1)
    pair = TimePair.from_snapshots(cloud_k, cloud_k1, args.dt, args.mode)
    dual = args.dual or default_dual_kind(cloud_k.dim)
    div = divergence_lagrangian(pair, dual_kind=dual, scheme=args.scheme)
    curl = curl_lagrangian(pair, dual_kind=dual, scheme=args.scheme)
    out = _out_dir(args)
    path = os.path.join(out, "operators.csv")
    dim = cloud_k.dim
    with open(path, "w") as fh:
        if dim == 2:
            fh.write("index,valid,divergence,curl\n")
            for i in range(div.n):
                fh.write(
                    f"{i},{int(div.valid[i])},{float(div.values[i])!r},"
                    f"{float(curl.values[i])!r}\n"
                )
        else:
            hel = relative_helicity(pair.cloud_k.velocities, curl)
            fh.write("index,valid,divergence,curl_x,curl_y,curl_z,helicity\n")
            for i in range(div.n):
                cx, cy, cz = (float(v) for v in curl.values[i])
                fh.write(
                    f"{i},{int(div.valid[i])},{float(div.values[i])!r},"
                    f"{cx!r},{cy!r},{cz!r},{float(hel.values[i])!r}\n"
                )
    print(
        f"operators N={cloud_k.n} d={dim} dt={args.dt!r} scheme={args.scheme} "
        f"dual={dual} mode={args.mode} -> {path}"
    )
    return 0


def _run_config(args, allowed_kinds) -> int:
    cfg = experiments.load_config(args.config)
    if cfg.kind not in allowed_kinds:
        raise ConfigError(
            f"config kind {cfg.kind!r} not usable here; expected one of "
            f"{sorted(allowed_kinds)}"
        )
    updates = {}
    seed = _resolve(args.seed, "VORODERIV_SEED", None)
    threads = _resolve(args.threads, "VORODERIV_THREADS", None)
    if seed is not None:
        updates["seed"] = seed
    if threads is not None:
        updates["threads"] = threads
    if args.out is not None:
        updates["out"] = args.out
    if updates:
        cfg = replace(cfg, **updates)
    manifest = experiments.run(cfg)
    print(
        f"{cfg.kind} done -> {os.path.join(cfg.out, manifest['csv'])} "
        f"({manifest['timings']['compute_seconds']:.2f}s)"
    )
    return 0


def _cmd_synth_field(args) -> int:
    seed = _resolve(args.seed, "VORODERIV_SEED", 0)
    dom = Domain.periodic_box(args.dim)
    fld = SyntheticSpectrumField.random(
        args.dim, k_max=args.k_max, exponent=args.exponent, seed=seed
    )
    cloud = sample_velocities(seed_uniform(dom, args.n, seed=seed), fld)
    out = _out_dir(args)
    path_k = os.path.join(out, "synth_k.vdsn")
    write_snapshot(path_k, cloud, SnapshotMeta(timestamp=0.0))
    made = [path_k]
    if args.dt:
        x1 = dom.wrap(cloud.positions + args.dt * cloud.velocities)
        cloud1 = ParticleCloud(dom, x1, fld.velocity(x1))
        path_k1 = os.path.join(out, "synth_k1.vdsn")
        write_snapshot(path_k1, cloud1, SnapshotMeta(timestamp=args.dt))
        made.append(path_k1)
    print(
        f"synthetic field d={args.dim} N={args.n} k_max={args.k_max} "
        f"seed={seed} -> {', '.join(made)}"
    )
    return 0


def _cmd_ingest(args) -> int:
    if len(args.snapshots) == 2:
        cloud, cloud1, meta = read_snapshot_pair(*args.snapshots)
        clouds = [(args.snapshots[0], cloud, meta)]
        clouds.append((args.snapshots[1], cloud1, read_snapshot(args.snapshots[1])[1]))
    else:
        clouds = []
        for path in args.snapshots:
            cloud, meta = read_snapshot(path)
            clouds.append((path, cloud, meta))
    for path, cloud, meta in clouds:
        opt = ", ".join(
            f"{k}={v!r}"
            for k, v in (
                ("nu", meta.nu),
                ("eps", meta.eps),
                ("tau_p", meta.tau_p),
                ("timestamp", meta.timestamp),
            )
            if v is not None
        )
        print(
            f"{path}: d={cloud.dim} N={cloud.n} L={cloud.domain.length!r} "
            f"periodic={cloud.domain.periodic}"
            + (f" [{opt}]" if opt else "")
        )
    if len(args.snapshots) == 2:
        print("pair: compatible (matched N and domain)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voroderiv",
        description="Finite-time differential operators on particle clouds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tessellate", help="build a tessellation, dump dual volumes")
    p.add_argument("--input", default="", help="snapshot file to tessellate")
    p.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p.add_argument("--n", type=int, default=0, help="particles to generate")
    p.add_argument("--dual", default="", choices=("",) + DUAL_KINDS)
    _add_common(p)
    p.set_defaults(fn=_cmd_tessellate)

    p = sub.add_parser("operators", help="operators from two measured snapshots")
    p.add_argument("snapshot_k")
    p.add_argument("snapshot_k1")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--scheme", default="midpoint", choices=SCHEMES)
    p.add_argument("--dual", default="", choices=("",) + DUAL_KINDS)
    p.add_argument("--mode", default=DEFAULT_MODE, choices=MODES)
    _add_common(p)
    p.set_defaults(fn=_cmd_operators)

    for name, kinds, help_text in (
        (
            "convergence",
            ("convergence", "scheme-comparison", "voronoi-vs-modified"),
            "time/space convergence and method-comparison sweeps",
        ),
        (
            "correlate",
            ("correlation-kdelta", "correlation-synthetic"),
            "Pearson correlation sweeps against resolution",
        ),
        (
            "stats",
            ("turbulence-stats",),
            "turbulence statistics pipeline (moments, PDFs, spectra)",
        ),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI experiment config")
        _add_common(p)
        p.set_defaults(fn=lambda a, _k=kinds: _run_config(a, _k))

    p = sub.add_parser("synth-field", help="write synthetic-spectrum snapshot(s)")
    p.add_argument("--dim", type=int, default=3, choices=(2, 3))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k-max", type=int, default=12, dest="k_max")
    p.add_argument("--exponent", type=float, default=None)
    p.add_argument("--dt", type=float, default=0.0, help="also write advected snapshot")
    _add_common(p)
    p.set_defaults(fn=_cmd_synth_field)

    p = sub.add_parser("ingest", help="validate snapshots, print headers")
    p.add_argument("snapshots", nargs="+")
    _add_common(p)
    p.set_defaults(fn=_cmd_ingest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SnapshotFormatError, FileNotFoundError) as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return 3
    except InvariantViolationError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 4
    except VoroderivError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
