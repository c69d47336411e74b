"""Acceptance gate: twelve numbered end-to-end criteria.

Each test runs one documented claim about the package at desk scale —
convergence rates, scheme ordering, dual-cell dichotomy, correlation
thresholds, operator exactness, geometry invariants, and the statistics
pipeline — and prints a single line

    ACCEPTANCE <n>: PASS|FAIL (<measured numbers and targets>)

that conftest echoes in the terminal summary.  The criteria are asserted at
their stated tolerances; nothing here is tuned to the current RNG draw.
"""
import csv
import functools
import time

import numpy as np
import oracles
import pytest

from voroderiv import analysis
from voroderiv.domain import Domain, ParticleCloud
from voroderiv.dual_cells import default_dual_kind, dual_volumes
from voroderiv.experiments import ExperimentConfig, run, _seeded_pair
from voroderiv.fields import (
    SyntheticSpectrumField,
    analytic_field,
    sample_velocities,
    seed_uniform,
)
from voroderiv.operators import (
    OperatorField,
    advect_euler,
    curl_eulerian,
    curl_lagrangian,
    divergence_eulerian,
    divergence_lagrangian,
    gradient_eulerian,
    gradient_green_gauss_2d,
    relative_helicity,
)
from voroderiv.rng import stream
from voroderiv.snapshot import SnapshotMeta, write_snapshot
from voroderiv.tessellation import build_delaunay

SEED = 0
SLOPE_BAND = (0.8, 1.2)
REPORT_LINES = []


def _report(num, ok, detail):
    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} ({detail})"
    REPORT_LINES.append(line)
    print(line)


def criterion(num):
    """Wrap a test returning (ok, detail) so it always reports one line."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                ok, detail = fn(*args, **kwargs)
            except Exception as exc:
                _report(num, False, f"unexpected error: {exc!r}")
                raise
            _report(num, ok, detail)
            assert ok, detail

        return wrapper

    return deco


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _in_band(value, band=SLOPE_BAND):
    return band[0] <= value <= band[1]


# ---------------------------------------------------------------------------


@criterion(1)
def test_criterion_01_convergence_in_time(outdir):
    cases = ((2, 100_000, "single_cosine_2d"), (3, 1_000_000, "single_sine_3d"))
    slopes, secs = {}, {}
    for dim, n, field in cases:
        t0 = time.perf_counter()
        man = run(
            ExperimentConfig(
                kind="convergence",
                dimension=dim,
                field=field,
                n=(n,),
                dt=tuple(np.logspace(-3, 0, 8)),
                seed=SEED,
                out=str(outdir / f"c01_{dim}d"),
            )
        )
        secs[dim] = time.perf_counter() - t0
        slopes[dim] = man["results"]["slopes_vs_dt"][str(n)]
    ok = all(_in_band(s) for s in slopes.values())
    detail = (
        f"dt error slope 2D={slopes[2]:.3f} at N=1e5, 3D={slopes[3]:.3f} at "
        f"N=1e6, target [0.8, 1.2]; 3D sweep took {secs[3]:.0f}s"
    )
    return ok, detail


@criterion(2)
def test_criterion_02_convergence_in_space(outdir):
    ns2 = (1_000, 3_000, 10_000, 30_000, 100_000)
    ns3 = (3_000, 10_000, 30_000, 100_000, 300_000)
    sweeps = (
        (2, "single_cosine_2d", ns2),
        (2, "potential_2d", ns2),
        (3, "single_sine_3d", ns3),
        (3, "potential_3d", ns3),
    )
    slopes = {}
    for dim, field, ns in sweeps:
        man = run(
            ExperimentConfig(
                kind="convergence",
                dimension=dim,
                field=field,
                n=ns,
                dt=(1e-3,),
                seed=SEED,
                out=str(outdir / f"c02_{field}"),
            )
        )
        slopes[field] = man["results"]["slopes_vs_delta"]["0.001"]
    ok = all(_in_band(s) for s in slopes.values())
    detail = "delta error slopes " + ", ".join(
        f"{name}={s:.3f}" for name, s in slopes.items()
    ) + ", target [0.8, 1.2]"
    return ok, detail


@criterion(3)
def test_criterion_03_scheme_ordering(outdir):
    out = outdir / "c03"
    man = run(
        ExperimentConfig(
            kind="scheme-comparison",
            dimension=2,
            field="single_cosine_2d",
            n=(100_000,),
            dt=(1e-4, 0.5),
            seed=SEED,
            out=str(out),
        )
    )
    big = man["results"]["errors_at_largest_dt"]
    small = {
        r["scheme"]: float(r["l2_error"])
        for r in _rows(out / "scheme-comparison.csv")
        if float(r["dt"]) == 1e-4
    }
    ordered = big["midpoint"] < big["log"] < big["linear"]
    spread = max(small.values()) / min(small.values()) - 1.0
    ok = ordered and spread <= 0.05
    detail = (
        f"errors at dt=0.5: midpoint={big['midpoint']:.4f} < log={big['log']:.4f}"
        f" < linear={big['linear']:.4f} is {ordered}; relative spread at "
        f"dt=1e-4 is {spread:.2%} (<= 5%)"
    )
    return ok, detail


@criterion(4)
def test_criterion_04_classic_vs_modified_dual(outdir):
    out = outdir / "c04"
    run(
        ExperimentConfig(
            kind="voronoi-vs-modified",
            dimension=2,
            field="potential_2d",
            n=(1_000, 10_000, 100_000),
            dt=(1e-3,),
            seed=SEED,
            out=str(out),
        )
    )
    rows = _rows(out / "voronoi-vs-modified.csv")
    classic = [
        float(r["pearson"])
        for r in rows
        if r["dual_kind"] == "classic_circumcenter"
    ]
    modified_top = max(
        float(r["pearson"])
        for r in rows
        if r["dual_kind"] == "modified_centroid" and int(r["n"]) == 100_000
    )
    saturated = abs(classic[-1] - classic[-2]) < 0.01
    ok = max(classic) < 0.95 and saturated and modified_top > 0.995
    detail = (
        f"classic pearson over N=1e3..1e5: max={max(classic):.4f} (< 0.95), "
        f"top-two spread={abs(classic[-1] - classic[-2]):.4f} (< 0.01); "
        f"modified pearson at N=1e5: {modified_top:.4f} (> 0.995)"
    )
    return ok, detail


def _kdelta_run(outdir, tag, dim, k, targets):
    """Crossing sweep: particle counts chosen to land on the given k*delta."""
    ns = tuple(int(round((2 * np.pi * k / x) ** dim)) for x in targets)
    man = run(
        ExperimentConfig(
            kind="correlation-kdelta",
            dimension=dim,
            n=ns,
            k=(k,),
            dt=(1e-3,),
            seed=SEED,
            out=str(outdir / tag),
        )
    )
    return man


@criterion(5)
def test_criterion_05_kdelta_correlation_thresholds(outdir):
    cross2, band2 = {}, (0.4177 * 0.85, 0.4177 * 1.15)
    for k in (2, 4, 8):
        man = _kdelta_run(outdir, f"c05_2d_k{k}", 2, k, (0.30, 0.36, 0.42, 0.50, 0.60))
        cross2[k] = man["results"]["kdelta_crossing_0.99"][str(k)]

    cross3, band3 = {}, (0.6173 * 0.85, 0.6173 * 1.15)
    targets3 = {2: (0.45, 0.55, 0.65, 0.78, 0.95), 4: (0.55, 0.63, 0.74, 0.86, 0.95)}
    for k, targets in targets3.items():
        man = _kdelta_run(outdir, f"c05_3d_k{k}", 3, k, targets)
        cross3[k] = man["results"]["kdelta_crossing_0.99"][str(k)]

    # In 3D the smallest k*delta reachable for k=8 under the 1e5-particle cap
    # is 8 * 2pi / 1e5^(1/3) = 1.08, above the 0.99 crossing, so the crossing
    # itself cannot be measured there.  The universal-threshold claim is that
    # correlation is a function of k*delta alone; we verify that directly by
    # matching k=8 against k=4 at the same k*delta.
    p = {}
    for k in (4, 8):
        man = _kdelta_run(outdir, f"c05_3d_match_k{k}", 3, k, (1.10,))
        p[k] = float(_rows(outdir / f"c05_3d_match_k{k}" / "correlation-kdelta.csv")[0]["pearson"])
    collapse = abs(p[8] - p[4])

    ok = (
        all(c is not None and band2[0] <= c <= band2[1] for c in cross2.values())
        and all(c is not None and band3[0] <= c <= band3[1] for c in cross3.values())
        and collapse <= 0.05
    )
    detail = (
        "0.99-crossing at k*delta: 2D "
        + ", ".join(f"k={k}: {c:.3f}" for k, c in cross2.items())
        + f" (target [{band2[0]:.3f}, {band2[1]:.3f}]); 3D "
        + ", ".join(f"k={k}: {c:.3f}" for k, c in cross3.items())
        + f" (target [{band3[0]:.3f}, {band3[1]:.3f}]); 3D k=8 vs k=4 pearson "
        + f"gap at matched k*delta=1.10: {collapse:.3f} (<= 0.05)"
    )
    return ok, detail


@criterion(6)
def test_criterion_06_synthetic_spectrum_correlation(outdir):
    results = {}
    for dim, n in ((2, 10_000), (3, 100_000)):
        dom = Domain.periodic_box(dim)
        base = seed_uniform(dom, n, seed=SEED)
        k_max = int(round(6.0 / base.delta))
        tess = build_delaunay(base)
        dual = default_dual_kind(dim)

        synth = SyntheticSpectrumField.random(dim, k_max=k_max, seed=SEED)
        pair = _seeded_pair(
            base.with_velocities(synth.velocity(base.positions)), 1e-3,
            "frozen_connectivity", tess,
        )
        curl = curl_lagrangian(pair, dual_kind=dual)
        p_synth = analysis.pearson(
            curl.values, synth.curl(base.positions), curl.valid
        )

        single = analytic_field("sine_wave", dim=dim, k=k_max)
        pair1 = _seeded_pair(
            base.with_velocities(single.velocity(base.positions)), 1e-3,
            "frozen_connectivity", tess,
        )
        div = divergence_lagrangian(pair1, dual_kind=dual)
        p_single = analysis.pearson(
            div.values, single.divergence(base.positions), div.valid
        )
        results[dim] = (k_max * base.delta, p_synth, p_single)

    ok = all(ps > pk for _, ps, pk in results.values())
    detail = "; ".join(
        f"{dim}D at k_max*delta={kd:.2f}: spectrum curl pearson={ps:.3f} > "
        f"single-mode pearson={pk:.3f}"
        for dim, (kd, ps, pk) in results.items()
    )
    return ok, detail


@criterion(7)
def test_criterion_07_eulerian_exact_on_linear_fields():
    worst_rel, worst_trace = 0.0, 0.0
    for dim in (2, 3):
        dom = Domain.open_box(dim)
        cloud = seed_uniform(dom, 4_000, seed=11 + dim)
        tess = build_delaunay(cloud)
        for trial in range(3):
            fld = analytic_field("linear", dim=dim, seed=50 * dim + trial)
            vel = fld.velocity(cloud.positions)
            a = fld.gradient(cloud.positions[:1])[0]
            scale = np.linalg.norm(a)
            div = divergence_eulerian(tess, vel)
            grad = gradient_eulerian(tess, vel)
            curl = curl_eulerian(tess, vel)
            valid = div.valid & grad.valid & curl.valid
            if dim == 2:
                exact_curl = a[1, 0] - a[0, 1]
            else:
                exact_curl = np.array(
                    [a[2, 1] - a[1, 2], a[0, 2] - a[2, 0], a[1, 0] - a[0, 1]]
                )
            err = max(
                np.abs(div.values[valid] - np.trace(a)).max(),
                np.abs(grad.values[valid] - a).max(),
                np.abs(curl.values[valid] - exact_curl).max(),
            )
            worst_rel = max(worst_rel, err / scale)
            tr = np.einsum("pii->p", grad.values[valid])
            worst_trace = max(
                worst_trace,
                np.abs(tr - div.values[valid]).max() / scale,
            )
    ok = worst_rel < 1e-10 and worst_trace < 1e-12
    detail = (
        f"worst relative error of flux-form divergence/gradient/curl on "
        f"linear fields: {worst_rel:.2e} (< 1e-10); worst trace-vs-divergence "
        f"deviation: {worst_trace:.2e} (< 1e-12)"
    )
    return ok, detail


@criterion(8)
def test_criterion_08_green_gauss_parity():
    dom = Domain.periodic_box(2)
    fld = analytic_field("single_cosine_2d")
    e_flux, e_gg, deltas = [], [], []
    for n in (2_000, 8_000, 30_000, 100_000):
        cloud = sample_velocities(seed_uniform(dom, n, seed=SEED), fld)
        tess = build_delaunay(cloud)
        exact = fld.divergence(cloud.positions)
        div = divergence_eulerian(tess, cloud.velocities)
        grad = gradient_green_gauss_2d(tess, cloud.velocities)
        tr = np.einsum("pii->p", grad.values)
        e_flux.append(analysis.l2_error(div.values, exact, div.valid))
        e_gg.append(analysis.l2_error(tr, exact, grad.valid))
        deltas.append(cloud.delta)
    ratios = [a / b for a, b in zip(e_flux, e_gg)]
    s_flux = analysis.fit_loglog_slope(np.array(deltas), np.array(e_flux)).slope
    s_gg = analysis.fit_loglog_slope(np.array(deltas), np.array(e_gg)).slope
    ok = (
        all(0.5 <= r <= 2.0 for r in ratios)
        and _in_band(s_flux)
        and _in_band(s_gg)
    )
    detail = (
        f"flux-form/Green-Gauss error ratio over the delta sweep: "
        f"{min(ratios):.2f}..{max(ratios):.2f} (within [0.5, 2]); slopes "
        f"flux={s_flux:.3f}, Green-Gauss={s_gg:.3f} (target [0.8, 1.2])"
    )
    return ok, detail


@criterion(9)
def test_criterion_09_affine_volume_oracle():
    worst = 0.0
    dt = 0.05
    for dim, n in ((2, 2_000), (3, 3_000)):
        rng = stream(200 + dim, "acceptance_affine")
        dom = Domain.open_box(dim)
        base = seed_uniform(dom, n, seed=SEED)
        for _ in range(3):
            a = rng.normal(scale=0.6, size=(dim, dim))
            cloud = base.with_velocities(base.positions @ a.T)
            pair = advect_euler(cloud, dt)
            div = divergence_lagrangian(pair, scheme="midpoint")
            expect = oracles.affine_divergence_midpoint(a, dt)
            rel = np.abs(div.values[div.valid] - expect).max() / max(
                1.0, abs(expect)
            )
            worst = max(worst, rel)
    ok = worst < 1e-10
    detail = (
        f"midpoint divergence on affine motion vs determinant closed form: "
        f"worst relative deviation {worst:.2e} over 3 random matrices in 2D "
        f"and 3D (< 1e-10)"
    )
    return ok, detail


@criterion(10)
def test_criterion_10_geometry_invariants():
    worst_part = 0.0
    euler_ok = True
    for dim, n in ((2, 700), (3, 400)):
        dom = Domain.periodic_box(dim)
        cloud = seed_uniform(dom, n, seed=21 + dim)
        tess = build_delaunay(cloud)
        for kind in ("classic_circumcenter", "modified_centroid"):
            cells = dual_volumes(tess, kind)
            assert cells.valid.all()
            rel = abs(cells.volumes.sum() - dom.volume) / dom.volume
            worst_part = max(worst_part, rel)
        if dim == 2:
            euler_ok = int(tess.owned.sum()) == 2 * n
    viol2 = oracles.empty_circumsphere_violations(
        build_delaunay(seed_uniform(Domain.periodic_box(2), 500, seed=31))
    )
    viol3 = oracles.empty_circumsphere_violations(
        build_delaunay(seed_uniform(Domain.periodic_box(3), 300, seed=32))
    )
    ok = worst_part < 1e-9 and euler_ok and viol2 == 0 and viol3 == 0
    detail = (
        f"dual-cell partition defect {worst_part:.2e} (< 1e-9, both kinds, "
        f"2D and 3D); 2D owned simplices == 2N is {euler_ok}; empty-"
        f"circumsphere violations 2D/3D: {viol2}/{viol3} (== 0)"
    )
    return ok, detail


@criterion(11)
def test_criterion_11_statistics_machinery():
    # Parseval: shell densities of a two-mode field sum to its mean square
    m = 64
    x = np.arange(m) * 2 * np.pi / m
    xx, yy = np.meshgrid(x, x, indexing="ij")
    f = 1.7 * np.sin(4 * xx) + 0.3 * np.cos(9 * yy)
    spec = analysis.spectrum(f)
    parseval = abs(spec.total - np.mean(f**2)) / np.mean(f**2)

    # Poisson-noise removal: the number-density spectrum of a uniform random
    # cloud is pure discreteness noise; after removal the fit band is ~zero
    dom = Domain.periodic_box(3)
    cloud = seed_uniform(dom, 200_000, seed=SEED)
    grid = analysis.project_box(dom, cloud.positions, np.ones(cloud.n), 48)
    dens = grid.counts / grid.counts.mean() - 1.0
    pspec = analysis.spectrum(dens, box_length=dom.length)
    cleaned = analysis.remove_poisson_noise(pspec)
    band = slice(int(np.ceil(0.7 * pspec.nyquist)), pspec.nyquist + 1)
    residual = cleaned.density[band].sum() / pspec.density[band].sum()

    # helicity spot checks: vectors with integer Pythagorean norms make the
    # aligned/anti-aligned/perpendicular cosines exact in floating point
    u = np.array([[1.0, 0, 0], [3, 4, 0], [1, 2, 2], [2, 3, 6]])
    ones = np.ones(len(u), bool)
    h_par = relative_helicity(u, OperatorField("curl", 2.0 * u, ones, {}))
    h_anti = relative_helicity(u, OperatorField("curl", -3.0 * u, ones, {}))
    h_perp = relative_helicity(
        u, OperatorField("curl", np.cross(u, np.ones(3)), ones, {})
    )
    spot_exact = (
        np.all(h_par.values == 1.0)
        and np.all(h_anti.values == -1.0)
        and np.all(h_perp.values == 0.0)
    )

    # helicity PDF of a measured cloud is supported on [-1, 1] with unit mass
    fld = SyntheticSpectrumField.random(3, k_max=3, seed=SEED)
    c3 = sample_velocities(seed_uniform(dom, 4_000, seed=SEED), fld)
    pair = advect_euler(c3, 0.01)
    curl = curl_lagrangian(pair)
    hel = relative_helicity(c3.velocities, curl)
    hvals = hel.values[hel.valid]
    hpdf = analysis.pdf(hel.values, bounds=(-1.0, 1.0), valid=hel.valid)
    support = (
        hvals.min() >= -1.0
        and hvals.max() <= 1.0
        and abs(hpdf.mass - 1.0) < 1e-9
        and hpdf.centers.min() > -1.0
        and hpdf.centers.max() < 1.0
    )

    ok = parseval < 1e-9 and residual < 0.05 and spot_exact and support
    detail = (
        f"Parseval defect {parseval:.1e} (< 1e-9); Poisson residual over fit "
        f"band {residual:.2%} (< 5%); aligned/anti/perpendicular helicity "
        f"exact: {spot_exact}; helicity PDF unit mass on [-1, 1]: {support}"
    )
    return ok, detail


@criterion(12)
def test_criterion_12_statistics_pipeline_at_desk_scale(outdir):
    # full-resolution DNS tables are out of reach here; the substitute is the
    # complete pipeline on a synthetic-spectrum cloud: two sizes run through
    # the in-memory path and the largest through snapshot files (ingest)
    out_a, out_b = outdir / "c12_small", outdir / "c12_ingest"
    run(
        ExperimentConfig(
            kind="turbulence-stats",
            dimension=3,
            n=(100_000, 300_000),
            k_max=12,
            dt=(0.01,),
            seed=SEED,
            out=str(out_a),
        )
    )
    dom = Domain.periodic_box(3)
    fld = SyntheticSpectrumField.random(3, k_max=12, seed=SEED)
    cloud = sample_velocities(seed_uniform(dom, 1_000_000, seed=SEED), fld)
    x1 = dom.wrap(cloud.positions + 0.01 * cloud.velocities)
    k_path, k1_path = outdir / "c12_k.vdsn", outdir / "c12_k1.vdsn"
    write_snapshot(k_path, cloud, SnapshotMeta(timestamp=0.0))
    write_snapshot(k1_path, ParticleCloud(dom, x1), SnapshotMeta(timestamp=0.01))
    run(
        ExperimentConfig(
            kind="turbulence-stats",
            dimension=3,
            dt=(0.01,),
            seed=SEED,
            out=str(out_b),
            snapshot_k=str(k_path),
            snapshot_k1=str(k1_path),
        )
    )

    stats = {
        int(r["n"]): r
        for r in _rows(out_a / "turbulence-stats.csv")
        + _rows(out_b / "turbulence-stats.csv")
    }
    variances = [
        float(stats[n]["curl_variance"]) for n in (100_000, 300_000, 1_000_000)
    ]
    monotone = variances[0] < variances[1] < variances[2]
    numeric_cols = (
        "tau_eta", "curl_variance", "curl_flatness",
        "helicity_mean", "helicity_variance",
    )
    finite = all(
        np.isfinite(float(r[c])) for r in stats.values() for c in numeric_cols
    )

    spec_rows = _rows(out_b / "turbulence-stats_spectrum.csv")
    ks = np.array([int(r["k"]) for r in spec_rows])
    energy = np.array([float(r["energy_noise_removed"]) for r in spec_rows])
    in_band = energy[(ks >= 1) & (ks <= 12)]
    decays = all(
        in_band[i + 1] <= in_band[i] * 1.05 for i in range(len(in_band) - 1)
    )
    tail = energy[ks > 12]
    tail_ok = not tail.size or tail.max() <= in_band[-1] + 1e-12

    hel_rows = [
        r
        for r in _rows(out_b / "turbulence-stats_pdf.csv")
        if r["quantity"] == "helicity"
    ]
    centers = np.array([float(r["center"]) for r in hel_rows])
    density = np.array([float(r["density"]) for r in hel_rows])
    mass = density.sum() * (centers[1] - centers[0])
    pdf_ok = (
        centers.min() > -1.0
        and centers.max() < 1.0
        and density.min() >= 0.0
        and abs(mass - 1.0) < 1e-6
    )

    ok = monotone and finite and decays and tail_ok and pdf_ok
    detail = (
        f"curl variance over N=1e5/3e5/1e6: "
        f"{variances[0]:.4f}/{variances[1]:.4f}/{variances[2]:.4f} "
        f"(strictly increasing: {monotone}); all moments finite: {finite}; "
        f"noise-removed energy spectrum non-increasing over k=1..12: {decays}"
        f" with tail <= E(12): {tail_ok}; helicity PDF mass "
        f"{mass:.6f} on (-1, 1): {pdf_ok}"
    )
    return ok, detail
