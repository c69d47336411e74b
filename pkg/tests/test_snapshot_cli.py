"""Snapshot file format round-trips, corruption handling, and the CLI surface."""
import csv
import struct

import numpy as np
import pytest

from voroderiv import cli, operators, snapshot
from voroderiv.domain import Domain, ParticleCloud
from voroderiv.errors import SnapshotFormatError
from voroderiv.fields import seed_uniform


def _cloud(dim, n, seed, *, periodic=True, lo=None):
    dom = (
        Domain.periodic_box(dim, lo=lo)
        if periodic
        else Domain.open_box(dim, lo=lo)
    )
    rng = np.random.default_rng(seed)
    pos = dom.lo_array() + dom.length * rng.random((n, dim))
    vel = rng.standard_normal((n, dim))
    return ParticleCloud(dom, pos, vel)


# ---------------------------------------------------------------------------
# binary round trips


@pytest.mark.parametrize("dim", [2, 3])
def test_round_trip_is_lossless(tmp_path, dim):
    cloud = _cloud(dim, 137, seed=dim)
    meta = snapshot.SnapshotMeta(nu=1.5e-5, eps=0.32, tau_p=None, timestamp=7.25)
    path = tmp_path / "a.vdsn"
    snapshot.write_snapshot(path, cloud, meta)
    back, bmeta = snapshot.read_snapshot(path)

    assert back.domain == cloud.domain
    np.testing.assert_array_equal(back.positions, cloud.positions)
    np.testing.assert_array_equal(back.velocities, cloud.velocities)
    assert bmeta == meta

    # writing the read-back cloud reproduces the file byte for byte
    path2 = tmp_path / "b.vdsn"
    snapshot.write_snapshot(path2, back, bmeta)
    assert path.read_bytes() == path2.read_bytes()


def test_round_trip_offset_open_box(tmp_path):
    # non-default lower corner and an open (non-periodic) box survive intact
    cloud = _cloud(2, 50, seed=9, periodic=False, lo=(-3.0, 1.5))
    path = tmp_path / "off.vdsn"
    snapshot.write_snapshot(path, cloud)
    back, meta = snapshot.read_snapshot(path)
    assert back.domain == cloud.domain
    assert back.domain.periodic == (False, False)
    np.testing.assert_array_equal(back.positions, cloud.positions)
    assert meta == snapshot.SnapshotMeta()  # all optional fields absent


def test_write_wraps_periodic_positions(tmp_path):
    dom = Domain.periodic_box(2)
    pos = np.array([[7.0, -1.0], [1.0, 2.0]])
    cloud = ParticleCloud(dom, pos, np.zeros((2, 2)))
    path = tmp_path / "w.vdsn"
    snapshot.write_snapshot(path, cloud)
    back, _ = snapshot.read_snapshot(path)
    np.testing.assert_allclose(back.positions, dom.wrap(pos), atol=1e-15)
    assert np.all(back.positions >= 0) and np.all(back.positions < dom.length)


def test_missing_velocities_default_to_zero(tmp_path):
    cloud = seed_uniform(Domain.periodic_box(2), 40, seed=1)
    assert cloud.velocities is None
    path = tmp_path / "z.vdsn"
    snapshot.write_snapshot(path, cloud)
    back, _ = snapshot.read_snapshot(path)
    assert np.all(back.velocities == 0.0)


# ---------------------------------------------------------------------------
# corrupted files


def _valid_bytes(tmp_path, n=25):
    path = tmp_path / "ok.vdsn"
    snapshot.write_snapshot(path, _cloud(2, n, seed=2))
    return path, bytearray(path.read_bytes())


def test_truncated_header_rejected(tmp_path):
    path, raw = _valid_bytes(tmp_path)
    path.write_bytes(raw[:20])
    with pytest.raises(SnapshotFormatError, match="truncated"):
        snapshot.read_snapshot(path)


def test_truncated_records_rejected(tmp_path):
    path, raw = _valid_bytes(tmp_path)
    path.write_bytes(raw[:-8])
    with pytest.raises(SnapshotFormatError, match="size"):
        snapshot.read_snapshot(path)


def test_bad_magic_rejected(tmp_path):
    path, raw = _valid_bytes(tmp_path)
    raw[:4] = b"NOPE"
    path.write_bytes(raw)
    with pytest.raises(SnapshotFormatError, match="magic"):
        snapshot.read_snapshot(path)


def test_unsupported_version_rejected(tmp_path):
    path, raw = _valid_bytes(tmp_path)
    raw[4:6] = struct.pack("<H", 99)
    path.write_bytes(raw)
    with pytest.raises(SnapshotFormatError, match="version"):
        snapshot.read_snapshot(path)


def test_non_finite_record_rejected(tmp_path):
    path, raw = _valid_bytes(tmp_path)
    off = snapshot._HEAD.size + 8 * 2  # first record double
    raw[off : off + 8] = struct.pack("<d", np.nan)
    path.write_bytes(raw)
    with pytest.raises(SnapshotFormatError, match="non-finite"):
        snapshot.read_snapshot(path)


def test_pair_count_mismatch_names_both_counts(tmp_path):
    pa, pb = tmp_path / "a.vdsn", tmp_path / "b.vdsn"
    snapshot.write_snapshot(pa, _cloud(2, 30, seed=3))
    snapshot.write_snapshot(pb, _cloud(2, 40, seed=4))
    with pytest.raises(SnapshotFormatError, match=r"N=30.*N=40") as exc:
        snapshot.read_snapshot_pair(pa, pb)
    assert "a.vdsn" in str(exc.value) and "b.vdsn" in str(exc.value)


def test_pair_domain_mismatch_rejected(tmp_path):
    pa, pb = tmp_path / "a.vdsn", tmp_path / "b.vdsn"
    cloud = _cloud(2, 30, seed=3)
    other = ParticleCloud(
        Domain.periodic_box(2, length=5.0),
        cloud.positions % 5.0,
        cloud.velocities,
    )
    snapshot.write_snapshot(pa, cloud)
    snapshot.write_snapshot(pb, other)
    with pytest.raises(SnapshotFormatError, match="domain"):
        snapshot.read_snapshot_pair(pa, pb)


# ---------------------------------------------------------------------------
# CLI surface


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_cli_synth_ingest_operators_chain(tmp_path, capsys):
    out = str(tmp_path)
    rc = cli.main(
        [
            "synth-field", "--dim", "3", "--n", "3000", "--k-max", "4",
            "--dt", "0.01", "--seed", "7", "--out", out,
        ]
    )
    assert rc == 0
    k = tmp_path / "synth_k.vdsn"
    k1 = tmp_path / "synth_k1.vdsn"
    assert k.exists() and k1.exists()

    rc = cli.main(["ingest", str(k), str(k1)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "pair: compatible" in text
    assert "N=3000" in text

    rc = cli.main(
        ["operators", str(k), str(k1), "--dt", "0.01", "--out", out]
    )
    assert rc == 0
    rows = _read_csv(tmp_path / "operators.csv")
    assert len(rows) == 3000
    assert set(rows[0]) == {
        "index", "valid", "divergence", "curl_x", "curl_y", "curl_z", "helicity",
    }
    hel = np.array([float(r["helicity"]) for r in rows])
    valid = np.array([r["valid"] == "1" for r in rows])
    assert valid.any()
    assert np.all(hel[valid] >= -1.0) and np.all(hel[valid] <= 1.0)

    # the CSV reproduces the in-memory computation exactly (repr round-trips)
    cloud_k, cloud_k1, _ = snapshot.read_snapshot_pair(k, k1)
    pair = operators.TimePair.from_snapshots(
        cloud_k, cloud_k1, 0.01, operators.DEFAULT_MODE
    )
    div = operators.divergence_lagrangian(pair, scheme="midpoint")
    got = np.array([float(r["divergence"]) for r in rows])
    np.testing.assert_array_equal(got, div.values)


def test_cli_tessellate_from_snapshot_and_generated(tmp_path, capsys):
    snap = tmp_path / "c.vdsn"
    snapshot.write_snapshot(snap, _cloud(2, 400, seed=5))
    rc = cli.main(["tessellate", "--input", str(snap), "--out", str(tmp_path)])
    assert rc == 0
    rows = _read_csv(tmp_path / "tessellate.csv")
    assert len(rows) == 400
    vols = np.array([float(r["volume"]) for r in rows])
    valid = np.array([r["valid"] == "1" for r in rows])
    box = Domain.periodic_box(2).volume
    assert abs(vols[valid].sum() - box) < 1e-9 * box

    out2 = tmp_path / "gen"
    rc = cli.main(
        ["tessellate", "--dim", "3", "--n", "300", "--seed", "3", "--out", str(out2)]
    )
    assert rc == 0
    assert (out2 / "tessellate.csv").exists()
    assert "d=3" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path):
    # config misuse -> 2
    assert cli.main(["tessellate", "--out", str(tmp_path)]) == 2
    # argparse rejects unknown subcommands with its own exit code 2
    assert cli.main(["no-such-command"]) == 2
    # unreadable / missing data -> 3
    assert cli.main(["ingest", str(tmp_path / "missing.vdsn")]) == 3
    bad = tmp_path / "bad.vdsn"
    bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNKJUNK" + b"\0" * 80)
    assert cli.main(["ingest", str(bad)]) == 3


def test_cli_seed_env_and_flag_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("VORODERIV_SEED", "11")
    a, b, c = (tmp_path / s for s in ("a", "b", "c"))
    for out in (a, b):
        rc = cli.main(
            ["synth-field", "--dim", "2", "--n", "200", "--k-max", "3", "--out", str(out)]
        )
        assert rc == 0
    # same env seed -> identical bytes
    assert (a / "synth_k.vdsn").read_bytes() == (b / "synth_k.vdsn").read_bytes()
    # explicit flag overrides the environment
    rc = cli.main(
        [
            "synth-field", "--dim", "2", "--n", "200", "--k-max", "3",
            "--seed", "12", "--out", str(c),
        ]
    )
    assert rc == 0
    assert (a / "synth_k.vdsn").read_bytes() != (c / "synth_k.vdsn").read_bytes()


def test_cli_config_kind_grouping(tmp_path):
    cfg = tmp_path / "conv.ini"
    cfg.write_text(
        "[experiment]\n"
        "kind = convergence\n"
        "dimension = 2\n"
        "field = single_cosine_2d\n"
        "n = 800\n"
        "dt = 0.01, 0.1\n"
    )
    out = tmp_path / "res"
    rc = cli.main(["convergence", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    assert (out / "convergence.csv").exists()
    assert (out / "convergence_manifest.json").exists()
    # the same config is rejected by a subcommand of another kind group
    assert cli.main(["correlate", "--config", str(cfg), "--out", str(out)]) == 2
