"""Declarative experiment harness.

Configs are flat INI files with a single [experiment] section; unknown keys
are hard errors so sweep typos cannot pass silently.  Each run writes one
primary CSV named after the experiment kind (plus extra tables for the
statistics pipeline) and a JSON manifest recording the resolved
configuration, library versions, timings, and fitted summary numbers.
Fixed seeds give byte-identical CSV output across runs.
"""
from __future__ import annotations

import configparser
import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import analysis
from .domain import Domain
from .dual_cells import KINDS as DUAL_KINDS, default_dual_kind
from .errors import ConfigError
from .fields import (
    DEFAULT_SPECTRUM_EXPONENT,
    SyntheticSpectrumField,
    analytic_field,
    kolmogorov_time,
    list_analytic_fields,
    sample_velocities,
    seed_uniform,
)
from .operators import (
    DEFAULT_MODE,
    MODES,
    SCHEMES,
    TimePair,
    advect_euler,
    curl_lagrangian,
    divergence_lagrangian,
    relative_helicity,
)
from .snapshot import read_snapshot_pair
from .tessellation import build_delaunay

KINDS = (
    "convergence",
    "scheme-comparison",
    "voronoi-vs-modified",
    "correlation-kdelta",
    "correlation-synthetic",
    "turbulence-stats",
)


@dataclass
class ExperimentConfig:
    kind: str
    dimension: int = 2
    field: str = ""
    n: tuple = ()
    dt: tuple = ()
    k: tuple = ()
    k_max: int = 0
    exponent: float | None = None
    scheme: str = "midpoint"
    dual_kind: str = ""  # empty = dimension default
    mode: str = DEFAULT_MODE
    seed: int = 0
    out: str = "."
    threads: int = 1
    grid: int = 0  # 0 = sized from the particle count
    snapshot_k: str = ""
    snapshot_k1: str = ""


def _parse_int(s):
    return int(s)


def _parse_float(s):
    return float(s)


def _parse_str(s):
    return s.strip()


def _parse_int_list(s):
    return tuple(int(tok) for tok in s.replace(",", " ").split())


def _parse_float_list(s):
    return tuple(float(tok) for tok in s.replace(",", " ").split())


_SCHEMA = {
    "kind": _parse_str,
    "dimension": _parse_int,
    "field": _parse_str,
    "n": _parse_int_list,
    "dt": _parse_float_list,
    "k": _parse_int_list,
    "k_max": _parse_int,
    "exponent": _parse_float,
    "scheme": _parse_str,
    "dual_kind": _parse_str,
    "mode": _parse_str,
    "seed": _parse_int,
    "out": _parse_str,
    "threads": _parse_int,
    "grid": _parse_int,
    "snapshot_k": _parse_str,
    "snapshot_k1": _parse_str,
}


def load_config(path) -> ExperimentConfig:
    """Parse and validate an INI experiment config."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    if "experiment" not in parser:
        raise ConfigError(f"{path}: missing [experiment] section")
    extra = [s for s in parser.sections() if s != "experiment"]
    if extra:
        raise ConfigError(f"{path}: unknown sections {extra}")
    values = {}
    for key, raw in parser["experiment"].items():
        if key not in _SCHEMA:
            raise ConfigError(f"{path}: unknown key {key!r}")
        try:
            values[key] = _SCHEMA[key](raw)
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {raw!r} ({exc})")
    if "kind" not in values:
        raise ConfigError(f"{path}: missing required key 'kind'")
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Check kind-specific requirements before any compute."""
    if cfg.kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {cfg.kind!r}")
    if cfg.dimension not in (2, 3):
        raise ConfigError(f"dimension must be 2 or 3, got {cfg.dimension}")
    for name, entries in (("n", cfg.n), ("dt", cfg.dt), ("k", cfg.k)):
        if any(not (e > 0) for e in entries):
            raise ConfigError(f"all {name} entries must be positive: {entries}")
    if cfg.scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}, got {cfg.scheme!r}")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.dual_kind and cfg.dual_kind not in DUAL_KINDS:
        raise ConfigError(
            f"dual_kind must be one of {DUAL_KINDS}, got {cfg.dual_kind!r}"
        )
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    if cfg.grid < 0:
        raise ConfigError("grid must be >= 0")

    needs_field = cfg.kind in (
        "convergence",
        "scheme-comparison",
        "voronoi-vs-modified",
    )
    if needs_field:
        known = set(list_analytic_fields()) | {"synthetic"}
        if cfg.field not in known:
            raise ConfigError(
                f"{cfg.kind} needs field from {sorted(known)}, got {cfg.field!r}"
            )
        if cfg.field == "sine_wave" and not cfg.k:
            raise ConfigError("field sine_wave needs a k entry")
    if cfg.kind == "correlation-kdelta" and not cfg.k:
        raise ConfigError("correlation-kdelta needs a nonempty k list")
    if cfg.kind in ("correlation-synthetic",) and cfg.k_max <= 0:
        raise ConfigError("correlation-synthetic needs k_max > 0")
    ingest = bool(cfg.snapshot_k or cfg.snapshot_k1)
    if cfg.kind == "turbulence-stats":
        if cfg.dimension != 3:
            raise ConfigError("turbulence-stats requires dimension = 3 (helicity)")
        if ingest:
            if not (cfg.snapshot_k and cfg.snapshot_k1):
                raise ConfigError("turbulence-stats ingest needs both snapshots")
        elif not (cfg.n and cfg.k_max > 0):
            raise ConfigError(
                "turbulence-stats needs snapshot_k/snapshot_k1 or n + k_max"
            )
    if cfg.kind != "turbulence-stats" or not ingest:
        if not cfg.n:
            raise ConfigError(f"{cfg.kind} needs a nonempty n list")
    if not cfg.dt:
        raise ConfigError(f"{cfg.kind} needs a nonempty dt list")


def _make_field(cfg: ExperimentConfig, dim: int):
    if cfg.field == "synthetic" or (
        not cfg.field and cfg.kind in ("correlation-synthetic", "turbulence-stats")
    ):
        return SyntheticSpectrumField.random(
            dim, k_max=cfg.k_max, exponent=cfg.exponent, seed=cfg.seed
        )
    if cfg.field == "sine_wave":
        return analytic_field("sine_wave", dim=dim, k=cfg.k[0])
    return analytic_field(cfg.field)


def _pool_map(fn, items, threads):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _versions() -> dict:
    import platform

    import scipy

    from . import __version__

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "voroderiv": __version__,
    }


def _seeded_pair(cloud, dt, mode, tess):
    """Euler-advect and reuse an already built first-instant tessellation."""
    pair = advect_euler(cloud, dt, mode)
    pair._cache["tess_k"] = tess
    return pair


def _dual(cfg: ExperimentConfig, dim: int) -> str:
    return cfg.dual_kind or default_dual_kind(dim)


def _auto_grid(n: int, dim: int) -> int:
    # floor of 28 keeps >= 5 shells inside the default Poisson fit band
    return int(np.clip(round(n ** (1.0 / dim) / 2.0), 28, 64))


# one experiment kind per function; each returns (header, rows, extras)


def _run_convergence(cfg: ExperimentConfig):
    dim = cfg.dimension
    fld = _make_field(cfg, dim)
    dual = _dual(cfg, dim)
    dom = Domain.periodic_box(dim)
    rows = []
    for n in cfg.n:
        cloud = sample_velocities(seed_uniform(dom, n, seed=cfg.seed), fld)
        tess = build_delaunay(cloud)
        exact = fld.divergence(cloud.positions)

        def work(dt):
            pair = _seeded_pair(cloud, dt, cfg.mode, tess)
            div = divergence_lagrangian(pair, dual_kind=dual, scheme=cfg.scheme)
            return analysis.l2_error(div.values, exact, div.valid)

        errors = _pool_map(work, cfg.dt, cfg.threads)
        delta = cloud.delta
        rows.extend((n, delta, dt, err) for dt, err in zip(cfg.dt, errors))

    extras = {"slopes_vs_dt": {}, "slopes_vs_delta": {}}
    arr = np.array([(r[0], r[1], r[2], r[3]) for r in rows])
    for n in cfg.n:
        sub = arr[arr[:, 0] == n]
        if len(sub) >= 3:
            window = analysis.preplateau_window(sub[:, 2], sub[:, 3])
            fit = analysis.fit_loglog_slope(sub[:, 2], sub[:, 3], window)
            extras["slopes_vs_dt"][str(n)] = fit.slope
    for dt in cfg.dt:
        sub = arr[arr[:, 2] == dt]
        if len(sub) >= 3:
            window = analysis.preplateau_window(sub[:, 1], sub[:, 3])
            fit = analysis.fit_loglog_slope(sub[:, 1], sub[:, 3], window)
            extras["slopes_vs_delta"][repr(float(dt))] = fit.slope
    return ("n", "delta", "dt", "l2_error"), rows, extras


def _run_scheme_comparison(cfg: ExperimentConfig):
    dim = cfg.dimension
    fld = _make_field(cfg, dim)
    dual = _dual(cfg, dim)
    dom = Domain.periodic_box(dim)
    n = cfg.n[0]
    cloud = sample_velocities(seed_uniform(dom, n, seed=cfg.seed), fld)
    tess = build_delaunay(cloud)
    exact = fld.divergence(cloud.positions)
    rows = []
    for dt in cfg.dt:
        pair = _seeded_pair(cloud, dt, cfg.mode, tess)
        for scheme in SCHEMES:
            div = divergence_lagrangian(pair, dual_kind=dual, scheme=scheme)
            err = analysis.l2_error(div.values, exact, div.valid)
            rows.append((scheme, n, dt, err))
    extras = {
        "errors_at_largest_dt": {
            r[0]: r[3] for r in rows if r[2] == max(cfg.dt)
        }
    }
    return ("scheme", "n", "dt", "l2_error"), rows, extras


def _run_voronoi_vs_modified(cfg: ExperimentConfig):
    dim = cfg.dimension
    fld = _make_field(cfg, dim)
    dom = Domain.periodic_box(dim)
    dt = cfg.dt[0]
    kinds = ("classic_circumcenter", default_dual_kind(dim))
    rows = []
    for n in cfg.n:
        cloud = sample_velocities(seed_uniform(dom, n, seed=cfg.seed), fld)
        tess = build_delaunay(cloud)
        exact = fld.divergence(cloud.positions)
        pair = _seeded_pair(cloud, dt, cfg.mode, tess)
        for dual in kinds:
            div = divergence_lagrangian(pair, dual_kind=dual, scheme=cfg.scheme)
            r = analysis.pearson(div.values, exact, div.valid)
            err = analysis.l2_error(div.values, exact, div.valid)
            rows.append((dual, n, cloud.delta, r, err))
    extras = {
        "max_pearson": {
            dual: max(r[3] for r in rows if r[0] == dual) for dual in kinds
        }
    }
    return ("dual_kind", "n", "delta", "pearson", "l2_error"), rows, extras


def _run_correlation_kdelta(cfg: ExperimentConfig):
    dim = cfg.dimension
    dom = Domain.periodic_box(dim)
    dt = cfg.dt[0]
    dual = _dual(cfg, dim)
    rows = []
    for n in cfg.n:
        base = seed_uniform(dom, n, seed=cfg.seed)
        tess = build_delaunay(base)
        for k in cfg.k:
            fld = analytic_field("sine_wave", dim=dim, k=k)
            cloud = sample_velocities(base, fld)
            pair = _seeded_pair(cloud, dt, cfg.mode, tess)
            div = divergence_lagrangian(pair, dual_kind=dual, scheme=cfg.scheme)
            exact = fld.divergence(cloud.positions)
            r = analysis.pearson(div.values, exact, div.valid)
            rows.append((k, n, base.delta, k * base.delta, r))
    extras = {"kdelta_crossing_0.99": {}}
    for k in cfg.k:
        sub = sorted((r[3], r[4]) for r in rows if r[0] == k)
        x = [s[0] for s in sub]
        y = [s[1] for s in sub]
        try:
            extras["kdelta_crossing_0.99"][str(k)] = analysis.interpolate_crossing(
                x, y, 0.99
            )
        except ValueError:
            extras["kdelta_crossing_0.99"][str(k)] = None
    return ("k", "n", "delta", "k_delta", "pearson"), rows, extras


def _run_correlation_synthetic(cfg: ExperimentConfig):
    dim = cfg.dimension
    dom = Domain.periodic_box(dim)
    dt = cfg.dt[0]
    dual = _dual(cfg, dim)
    fld = _make_field(cfg, dim)
    rows = []
    for n in cfg.n:
        cloud = sample_velocities(seed_uniform(dom, n, seed=cfg.seed), fld)
        tess = build_delaunay(cloud)
        pair = _seeded_pair(cloud, dt, cfg.mode, tess)
        curl = curl_lagrangian(pair, dual_kind=dual, scheme=cfg.scheme)
        exact = fld.curl(cloud.positions)
        r = analysis.pearson(curl.values, exact, curl.valid)
        rows.append((cfg.k_max, n, cloud.delta, cfg.k_max * cloud.delta, r))
    return ("k_max", "n", "delta", "kmax_delta", "pearson_curl"), rows, {}


def _stats_for_cloud(cfg, pair, tau_eta):
    """Curl, helicity, moments, PDFs, spectra for one time pair."""
    dim = pair.cloud_k.dim
    dual = _dual(cfg, dim)
    curl = curl_lagrangian(pair, dual_kind=dual, scheme=cfg.scheme)
    vel = pair.cloud_k.velocities
    hel = relative_helicity(vel, curl)
    norm_curl = curl.values * tau_eta
    mom = analysis.moments(norm_curl, curl.valid)
    hmom = analysis.moments(hel.values, hel.valid)
    return curl, hel, norm_curl, mom, hmom


def _run_turbulence_stats(cfg: ExperimentConfig):
    dim = cfg.dimension
    dt = cfg.dt[0]
    rows = []
    per_n = []
    ingest = bool(cfg.snapshot_k)
    if ingest:
        cloud_k, cloud_k1, meta = read_snapshot_pair(cfg.snapshot_k, cfg.snapshot_k1)
        tau_eta = (
            kolmogorov_time(meta.nu, meta.eps)
            if meta.nu is not None and meta.eps is not None
            else 1.0
        )
        pair = TimePair.from_snapshots(cloud_k, cloud_k1, dt, cfg.mode)
        per_n.append((cloud_k.n, pair, tau_eta))
    else:
        dom = Domain.periodic_box(dim)
        fld = _make_field(cfg, dim)
        for n in cfg.n:
            cloud = sample_velocities(seed_uniform(dom, n, seed=cfg.seed), fld)
            per_n.append((n, advect_euler(cloud, dt, cfg.mode), 1.0))

    pdf_rows = []
    spec_rows = []
    for n, pair, tau_eta in per_n:
        curl, hel, norm_curl, mom, hmom = _stats_for_cloud(cfg, pair, tau_eta)
        rows.append(
            (
                n,
                tau_eta,
                mom["variance"],
                mom["flatness"],
                hmom["mean"],
                hmom["variance"],
            )
        )
        if n == max(p[0] for p in per_n):
            cpdf = analysis.pdf(norm_curl, valid=curl.valid)
            hpdf = analysis.pdf(hel.values, bounds=(-1.0, 1.0), valid=hel.valid)
            pdf_rows.extend(
                ("curl", c, d) for c, d in zip(cpdf.centers, cpdf.density)
            )
            pdf_rows.extend(
                ("helicity", c, d) for c, d in zip(hpdf.centers, hpdf.density)
            )
            m = cfg.grid or _auto_grid(n, dim)
            dom = pair.cloud_k.domain
            gv = analysis.project_box(
                dom, pair.cloud_k.positions, pair.cloud_k.velocities, m
            )
            gw = analysis.project_box(
                dom, pair.cloud_k.positions, curl.values, m, valid=curl.valid
            )
            espec = analysis.spectrum(gv, kind="energy")
            wspec = analysis.spectrum(gw, kind="enstrophy")
            eclean = analysis.remove_poisson_noise(espec)
            wclean = analysis.remove_poisson_noise(wspec)
            for i in range(len(espec.k)):
                spec_rows.append(
                    (
                        int(espec.k[i]),
                        espec.density[i],
                        eclean.density[i],
                        wspec.density[i],
                        wclean.density[i],
                    )
                )
    extras = {
        "variance_monotone_in_n": bool(
            all(rows[i][2] < rows[i + 1][2] for i in range(len(rows) - 1))
        ),
        "pdf_csv": "turbulence-stats_pdf.csv",
        "spectrum_csv": "turbulence-stats_spectrum.csv",
        "_side_tables": {
            "turbulence-stats_pdf.csv": (
                ("quantity", "center", "density"),
                pdf_rows,
            ),
            "turbulence-stats_spectrum.csv": (
                (
                    "k",
                    "energy",
                    "energy_noise_removed",
                    "enstrophy",
                    "enstrophy_noise_removed",
                ),
                spec_rows,
            ),
        },
    }
    return (
        (
            "n",
            "tau_eta",
            "curl_variance",
            "curl_flatness",
            "helicity_mean",
            "helicity_variance",
        ),
        rows,
        extras,
    )


_RUNNERS = {
    "convergence": _run_convergence,
    "scheme-comparison": _run_scheme_comparison,
    "voronoi-vs-modified": _run_voronoi_vs_modified,
    "correlation-kdelta": _run_correlation_kdelta,
    "correlation-synthetic": _run_correlation_synthetic,
    "turbulence-stats": _run_turbulence_stats,
}


def run(cfg: ExperimentConfig) -> dict:
    """Execute one experiment; returns the manifest dict after writing files."""
    validate(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    t0 = time.perf_counter()
    header, rows, extras = _RUNNERS[cfg.kind](cfg)
    compute_s = time.perf_counter() - t0

    side = extras.pop("_side_tables", {})
    csv_path = os.path.join(cfg.out, f"{cfg.kind}.csv")
    _write_csv(csv_path, header, rows)
    for name, (shead, srows) in side.items():
        _write_csv(os.path.join(cfg.out, name), shead, srows)

    manifest = {
        "config": asdict(cfg),
        "csv": os.path.basename(csv_path),
        "csv_columns": list(header),
        "results": extras,
        "timings": {"compute_seconds": compute_s},
        "versions": _versions(),
    }
    with open(os.path.join(cfg.out, f"{cfg.kind}_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return manifest
