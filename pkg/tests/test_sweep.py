import io
import json
import math

import pytest

from extdicke import sweep
from extdicke.meanfield import critical_coupling
from extdicke.model import ModelParams
from extdicke.sweep import (
    ENERGY_COLUMNS,
    FINITE_COLUMNS,
    MEANFIELD_COLUMNS,
    Axis,
    SweepSpec,
    columns_for,
    energy_sweep,
    phase_diagram_finite,
    phase_diagram_meanfield,
    read_csv,
    render_csv,
    render_json,
    worker_count,
)

TANGENT = math.sqrt(0.375)


def mf_row(value, **kw):
    spec = SweepSpec(Axis("sqrt_delta_kappa", value, value + 1.0, 2), **kw)
    return phase_diagram_meanfield(spec)[0]


def test_meanfield_tangent_point():
    row = mf_row(TANGENT)
    assert row["kappa"] == pytest.approx(0.375, rel=1e-15)
    assert row["lambda_c"] == pytest.approx(0.612372, abs=1e-6)
    assert row["lambda_star"] == pytest.approx(0.612372, abs=1e-6)
    assert row["window_nonempty"] is False


def test_meanfield_open_window():
    row = mf_row(0.8)
    assert row["kappa"] == pytest.approx(0.64, rel=1e-15)
    assert row["lambda_c"] == pytest.approx(math.sqrt(0.6 * 3.56) / 2, rel=1e-14)
    assert row["lambda_c"] == pytest.approx(0.730753, abs=1e-6)
    assert row["lambda_star"] == pytest.approx(0.8, rel=1e-15)
    assert row["window_nonempty"] is True


def test_meanfield_no_go_axis():
    spec = SweepSpec(Axis("sqrt_delta_kappa", 0.01, 3.0, 40), omega_aa=0.0)
    assert not any(r["window_nonempty"] for r in phase_diagram_meanfield(spec))


def test_meanfield_delta_override():
    row = mf_row(0.8, delta=2.0)
    assert row["kappa"] == pytest.approx(0.32, rel=1e-15)
    assert row["lambda_star"] == pytest.approx(0.8, rel=1e-15)


def test_negative_axis_rejected():
    spec = SweepSpec(Axis("sqrt_delta_kappa", -0.1, 1.0, 3))
    with pytest.raises(ValueError):
        phase_diagram_meanfield(spec)
    with pytest.raises(ValueError):
        phase_diagram_finite(spec)


@pytest.mark.parametrize("kw", [
    dict(count=1), dict(start=1.0, stop=1.0), dict(spacing="cubic"), dict(start=0.0, spacing="log"),
])
def test_axis_validation(kw):
    base = dict(name="x", start=0.1, stop=1.0, count=3)
    base.update(kw)
    with pytest.raises(ValueError):
        Axis(**base)


def test_axis_values():
    assert Axis("x", 0.0, 1.0, 5).values() == pytest.approx([0, 0.25, 0.5, 0.75, 1.0])
    assert Axis("x", 1.0, 100.0, 3, "log").values() == pytest.approx([1, 10, 100])


@pytest.mark.parametrize("atoms", [(16, 3), (0,), (-2,), (2.5,)])
def test_spec_rejects_odd_or_nonpositive_atoms(atoms):
    with pytest.raises(ValueError):
        SweepSpec(Axis("x", 0.1, 1.0, 2), atoms=atoms)


def test_worker_count_from_environment(monkeypatch):
    spec = SweepSpec(Axis("x", 0.1, 1.0, 2), workers=3)
    monkeypatch.delenv("DICKE_THREADS", raising=False)
    assert worker_count(spec) == 3
    monkeypatch.setenv("DICKE_THREADS", "2")
    assert worker_count(spec) == 2
    monkeypatch.setenv("DICKE_THREADS", "zero")
    with pytest.raises(ValueError):
        worker_count(spec)


def finite_spec(**kw):
    args = dict(axis=Axis("sqrt_delta_kappa", 0.7, 0.8, 2), atoms=(8, 16), bracket=(0.95, 2.2),
                points=7, rounds=2)
    args.update(kw)
    return SweepSpec(**args)


def test_finite_rows_are_ordered_in_atoms():
    rows = phase_diagram_finite(finite_spec(atoms=(8, 16, 32)))
    assert [(r["axis"], r["atoms"]) for r in rows] == [
        (a, n) for a in (0.7, 0.8) for n in (8, 16, 32)]
    for axis in (0.7, 0.8):
        sub = [r for r in rows if r["axis"] == axis]
        assert all(r["status"] == "ok" for r in sub)
        gaps = [r["lambda_c_N"] - r["lambda_c"] for r in sub]
        assert gaps[0] > gaps[1] > gaps[2] > 0
        for r in sub:
            assert r["below_star"] == (r["lambda_c_N"] < r["lambda_star"])


def test_finite_sixteen_vs_sixty_four_at_axis_075():
    spec = finite_spec(axis=Axis("sqrt_delta_kappa", 0.75, 0.8, 2), atoms=(16, 64),
                       bracket=(0.95, 1.6), points=9, rounds=3)
    rows = [r for r in phase_diagram_finite(spec) if r["axis"] == 0.75]
    lam_c = math.sqrt(0.6 * 3.25) / 2
    assert rows[0]["lambda_c"] == pytest.approx(lam_c, rel=1e-14)
    assert abs(rows[1]["lambda_c_N"] - lam_c) < abs(rows[0]["lambda_c_N"] - lam_c)


@pytest.mark.slow
def test_finite_sixteen_vs_one_twenty_eight_at_axis_075():
    spec = finite_spec(axis=Axis("sqrt_delta_kappa", 0.75, 0.8, 2), atoms=(16, 128),
                       bracket=(0.95, 1.6), points=9, rounds=3)
    rows = [r for r in phase_diagram_finite(spec) if r["axis"] == 0.75]
    lam_c = math.sqrt(0.6 * 3.25) / 2
    assert abs(rows[1]["lambda_c_N"] - lam_c) < abs(rows[0]["lambda_c_N"] - lam_c)


def test_finite_bracket_failure_is_recorded_per_row():
    rows = phase_diagram_finite(finite_spec(atoms=(8,), bracket=(0.2, 0.4), points=5, rounds=1))
    assert all(r["status"].startswith("bracket-failure") for r in rows)
    assert all(r["lambda_c_N"] is None for r in rows)
    text = render_csv(rows, FINITE_COLUMNS, timestamp="t")
    assert read_csv(io.StringIO(text))[2][0]["lambda_c_N"] is None


def test_finite_collapsed_window_is_recorded_per_row():
    rows = phase_diagram_finite(finite_spec(atoms=(8,), omega_aa=-0.6, points=5, rounds=1))
    assert all(r["status"].startswith("solver-failure: WindowCollapsed") for r in rows)


def energy_spec(**kw):
    args = dict(axis=Axis("lambda_ratio", 0.1, 1.5, 8), atoms=(8, 16))
    args.update(kw)
    return SweepSpec(**args)


def test_energy_sweep_rows():
    rows = energy_sweep(energy_spec())
    assert len(rows) == 16
    assert [r["atoms"] for r in rows] == [8] * 8 + [16] * 8
    for n in (8, 16):
        sub = [r for r in rows if r["atoms"] == n]
        assert all(r["status"] == "ok" for r in sub)
        first = sub[0]
        assert first["lambda_ratio"] == pytest.approx(0.1)
        assert abs(first["e0_per_atom"] + 0.5) < 1.0 / n
        e = [r["e0_per_atom"] for r in sub]
        assert all(b < a for a, b in zip(e, e[1:]))
        p = ModelParams(1.0, 1.0, 0.0, -0.2, 0.5, n)
        assert first["lambda"] == pytest.approx(0.1 * critical_coupling(p), rel=1e-14)


def test_energy_sweep_dip_inside_bracket():
    rows = energy_sweep(energy_spec(axis=Axis("lambda_ratio", 0.8, 1.8, 11), atoms=(16,)))
    d2 = [r["d2e0"] for r in rows]
    i = d2.index(min(d2))
    assert 0 < i < len(d2) - 1


def test_energy_axis_must_leave_room_for_stencil():
    with pytest.raises(ValueError):
        energy_sweep(energy_spec(axis=Axis("lambda_ratio", 0.0, 1.0, 3)))


def test_csv_round_trip():
    rows = energy_sweep(energy_spec(axis=Axis("lambda_ratio", 0.5, 1.5, 3)))
    text = render_csv(rows, ENERGY_COLUMNS, {"atoms": "8,16"}, timestamp="2020-01-01T00:00:00+00:00")
    comments, columns, back = read_csv(io.StringIO(text))
    assert columns == list(ENERGY_COLUMNS)
    assert comments[0].startswith("# extdicke ")
    assert comments[1] == "# config: atoms=8,16"
    assert comments[2] == "# generated: 2020-01-01T00:00:00+00:00"
    assert back == [{c: r[c] for c in ENERGY_COLUMNS} for r in rows]


def test_meanfield_csv_round_trip_with_nan():
    spec = SweepSpec(Axis("sqrt_delta_kappa", 0.0, 1.0, 5), omega_aa=-0.6)
    rows = phase_diagram_meanfield(spec)
    assert math.isnan(rows[0]["lambda_c"])
    back = read_csv(io.StringIO(render_csv(rows, MEANFIELD_COLUMNS, timestamp="t")))[2]
    assert math.isnan(back[0]["lambda_c"])
    assert [r["lambda_star"] for r in back] == [r["lambda_star"] for r in rows]


def test_json_rows():
    spec = SweepSpec(Axis("sqrt_delta_kappa", 0.0, 1.0, 3), omega_aa=-0.6)
    rows = phase_diagram_meanfield(spec)
    lines = render_json(rows, MEANFIELD_COLUMNS).splitlines()
    assert len(lines) == 3
    objs = [json.loads(line) for line in lines]
    assert list(objs[0]) == list(MEANFIELD_COLUMNS)
    assert objs[0]["lambda_c"] is None
    assert objs[2]["lambda_star"] == 1.0


def test_timing_column_only_on_request():
    rows = energy_sweep(energy_spec(axis=Axis("lambda_ratio", 0.5, 1.0, 2), atoms=(8,), timing=True))
    assert columns_for(rows, ENERGY_COLUMNS)[-1] == "wall_time"
    assert all(r["wall_time"] > 0 for r in rows)
    rows = energy_sweep(energy_spec(axis=Axis("lambda_ratio", 0.5, 1.0, 2), atoms=(8,)))
    assert columns_for(rows, ENERGY_COLUMNS) == ENERGY_COLUMNS


def test_reruns_are_byte_identical():
    spec = energy_spec(axis=Axis("lambda_ratio", 0.5, 1.5, 4))
    a = render_csv(energy_sweep(spec), ENERGY_COLUMNS, spec.describe())
    b = render_csv(energy_sweep(spec), ENERGY_COLUMNS, spec.describe())
    strip = lambda t: [ln for ln in t.splitlines() if not ln.startswith("# generated:")]
    assert strip(a) == strip(b)


def test_parallel_matches_serial(monkeypatch):
    monkeypatch.delenv("DICKE_THREADS", raising=False)
    serial = finite_spec(atoms=(8, 16), points=5, rounds=1)
    parallel = finite_spec(atoms=(8, 16), points=5, rounds=1, workers=2)
    assert phase_diagram_finite(serial) == phase_diagram_finite(parallel)
    spec = energy_spec(axis=Axis("lambda_ratio", 0.5, 1.5, 3))
    assert energy_sweep(spec) == energy_sweep(energy_spec(axis=spec.axis, workers=2))


def test_write_atomic_leaves_no_temporaries(tmp_path):
    target = tmp_path / "out.csv"
    sweep.write_atomic(str(target), "a\n")
    sweep.write_atomic(str(target), "b\n")
    assert target.read_text() == "b\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.csv"]
