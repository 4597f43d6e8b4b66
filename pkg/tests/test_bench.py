import csv
import io
import json
import math

import numpy as np
import pytest

from metrovec.bench import (
    CSV_COLUMNS, BenchConfig, GeneratorSpec, generate_model, read_report_json, report_to_dict,
    run_benchmark, write_report,
)
from metrovec.model import ModelError
from metrovec.modelio import dumps

SMALL = GeneratorSpec(16, 8, (4, 6), "uniform", 3)


@pytest.fixture(scope="module")
def report():
    cfg = BenchConfig(SMALL, ("reference", "basic", "vector4", "coalesced"), sweeps=20, repetitions=3,
                      betas=(0.5, 1.0), workers=1)
    return run_benchmark(cfg)


def test_full_size_generation():
    assert generate_model(256, 96, seed=1).n_spins == 24_576


def test_degenerate_ring_needs_flag():
    with pytest.raises(ModelError):
        generate_model(4, 1, (4, 6), "uniform", 0)
    m = generate_model(4, 1, (4, 6), "uniform", 0, allow_degenerate=True)
    assert m.n_spins == 4 and list(m.degrees) == [2] * 4


def test_generation_deterministic():
    assert dumps(SMALL.build()) == dumps(SMALL.build())
    assert dumps(SMALL.build()) != dumps(GeneratorSpec(16, 8, (4, 6), "uniform", 4).build())


@pytest.mark.parametrize("dist", ["uniform", "pm1"])
def test_generated_values(dist):
    m = generate_model(8, 10, (4, 6), dist, 2)
    vals = np.concatenate([m.h, m.couplings[~m.is_tau]])
    if dist == "pm1":
        assert set(np.unique(m.couplings[~m.is_tau])) <= {-1.0, 1.0}
    else:
        assert np.all(np.abs(vals) <= 1) and np.all(vals != 0)
        assert np.all(np.ldexp(vals.astype(np.float64), 16) % 1 == 0)


def test_unattainable_degree():
    with pytest.raises(ModelError):
        generate_model(8, 4, (4, 6), "uniform", 0)
    with pytest.raises(ModelError):
        generate_model(8, 8, (4, 6), "gauss", 0)


def test_report_shape(report):
    assert [r.engine for r in report.results] == ["reference", "basic", "vector4", "coalesced"]
    assert report.result("reference").speedup_vs_reference == 1.0
    for r in report.results:
        assert r.sd_seconds >= 0 and r.reps == 3 and len(r.times) == 3
        assert 0 < r.flip_rate < 1
        assert r.wait[1] <= r.wait[4] <= r.wait[32]
    assert report.environment["host"]


def test_reciprocal_speedups(report):
    for a in ("basic", "vector4"):
        assert report.speedup(a, "reference") * report.speedup("reference", a) == pytest.approx(1.0, rel=0.01)


def test_single_engine_baseline():
    rep = run_benchmark(BenchConfig(SMALL, ("basic",), sweeps=5, repetitions=2, betas=(1.0,), workers=1))
    assert [r.speedup_vs_reference for r in rep.results] == [1.0]


def test_csv_columns(report):
    text = write_report(report, "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert len(rows) == 4 and text.count("\n") == 5


def test_json_round_trip_bit_exact(report, tmp_path):
    path = tmp_path / "r.json"
    write_report(report, "json", path)
    back = read_report_json(path.read_text())
    for row, r in zip(back["results"], report.results):
        for k, v in r.row().items():
            if isinstance(v, float) and math.isnan(v):
                assert math.isnan(row[k])
            else:
                assert row[k] == v
    assert back == json.loads(json.dumps(report_to_dict(report)))


def test_write_report_errors(report, tmp_path):
    with pytest.raises(OSError) as exc:
        write_report(report, "csv", tmp_path / "missing" / "r.csv")
    assert "missing" in str(exc.value)
    with pytest.raises(ValueError):
        write_report(report, "xml")


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(SMALL, (), repetitions=1)
    with pytest.raises(ValueError):
        BenchConfig(SMALL, ("basic",), repetitions=0)
    with pytest.raises(ValueError):
        BenchConfig(SMALL, ("turbo",))


def test_checksums_stable_across_workers():
    cfg = dict(model=SMALL, engines=("basic", "vector4"), sweeps=10, repetitions=2, betas=(0.5, 1.0, 2.0))
    a = run_benchmark(BenchConfig(**cfg, workers=1))
    b = run_benchmark(BenchConfig(**cfg, workers=3))
    assert [r.checksum for r in a.results] == [r.checksum for r in b.results]
