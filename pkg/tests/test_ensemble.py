import numpy as np
import pytest

from trajtherm.ensemble import (
    EnsembleStats,
    convergence_series,
    histogram,
    run_ensemble,
    support_points,
)
from trajtherm.entropy import integral_ft_estimate
from trajtherm.errors import EmptyInput
from trajtherm.model import build_preset
from trajtherm.records import (
    parse_record_line,
    read_records,
    record_row,
    serialize_record,
    write_records,
)


@pytest.fixture(scope="module")
def small_run():
    m = build_preset("driven_qubit_thermal", {"tau": 40.0, "gamma0": 5e-3})
    return run_ensemble(m, "jump", 600, base_seed=101)


class TestStats:
    def test_single_record_equals_its_values(self, small_run):
        rec = small_run.records[0]
        st = EnsembleStats.from_records([rec])
        assert st.quantities["dE"].count == 1
        assert st.quantities["dE"].mean == rec.ledger.dE
        assert st.quantities["s_tot"].mean == rec.ep.s_tot

    def test_merge_matches_batch(self, small_run):
        recs = small_run.records
        batch = EnsembleStats.from_records(recs)
        merged = EnsembleStats.from_records(recs[:251]).merge(
            EnsembleStats.from_records(recs[251:])
        )
        for q in batch.quantities:
            assert merged.quantities[q].count == batch.quantities[q].count
            assert merged.quantities[q].mean == pytest.approx(
                batch.quantities[q].mean, abs=1e-12
            )
            assert merged.quantities[q].m2 == pytest.approx(
                batch.quantities[q].m2, rel=1e-10, abs=1e-12
            )

    def test_merge_associative_commutative(self, small_run):
        recs = small_run.records
        rng = np.random.default_rng(0)
        cuts = np.sort(rng.choice(np.arange(1, len(recs)), size=2, replace=False))
        a = EnsembleStats.from_records(recs[: cuts[0]])
        b = EnsembleStats.from_records(recs[cuts[0]: cuts[1]])
        c = EnsembleStats.from_records(recs[cuts[1]:])
        left = a.merge(b).merge(c)
        right = a.merge(b.merge(c))
        swapped = c.merge(a).merge(b)
        for q in left.quantities:
            for other in (right, swapped):
                assert left.quantities[q].mean == pytest.approx(
                    other.quantities[q].mean, abs=1e-12
                )
        for q in left.ft:
            for other in (right, swapped):
                if np.isfinite(left.ft[q].lse1):
                    assert left.ft[q].lse1 == pytest.approx(other.ft[q].lse1, abs=1e-12)

    def test_merging_singles_equals_batch(self, small_run):
        recs = small_run.records[:40]
        acc = EnsembleStats.from_records([recs[0]])
        for rec in recs[1:]:
            acc = acc.merge(EnsembleStats.from_records([rec]))
        batch = EnsembleStats.from_records(recs)
        assert acc.quantities["s_tot"].mean == pytest.approx(
            batch.quantities["s_tot"].mean, abs=1e-12
        )


class TestPersistence:
    def test_round_trip_exact(self, small_run, tmp_path):
        path = tmp_path / "records.txt"
        write_records(path, small_run.records)
        rows = read_records(path)
        assert len(rows) == len(small_run.records)
        for rec, row in zip(small_run.records, rows):
            assert record_row(rec) == row

    def test_line_round_trip_is_identity(self, small_run):
        for rec in small_run.records[:25]:
            line = serialize_record(rec)
            rebuilt = parse_record_line(line)
            assert rebuilt["dE"] == rec.ledger.dE
            assert rebuilt["s_tot"] == rec.ep.s_tot
            assert rebuilt["p_ntau"] == rec.p_ntau


class TestDeterminism:
    def test_worker_count_invariance(self):
        m = build_preset("driven_qubit_thermal", {"tau": 30.0})
        a = run_ensemble(m, "jump", 300, base_seed=7, threads=1)
        b = run_ensemble(m, "jump", 300, base_seed=7, threads=3)
        assert [serialize_record(r) for r in a.records] == [
            serialize_record(r) for r in b.records
        ]
        assert a.stats.quantities["s_tot"].mean == b.stats.quantities["s_tot"].mean

    def test_rerun_identical(self):
        m = build_preset("dispersive_qubit", {"tau": 20.0})
        a = run_ensemble(m, "diffusive", 50, base_seed=3)
        b = run_ensemble(m, "diffusive", 50, base_seed=3)
        assert [serialize_record(r) for r in a.records] == [
            serialize_record(r) for r in b.records
        ]


class TestHistogram:
    def test_single_sample(self):
        h = histogram([2.0], binning=[1.0, 3.0])
        assert h.counts.tolist() == [1]
        assert h.density[0] == pytest.approx(0.5)  # 1 / (N * width)

    def test_uniform_flat(self):
        rng = np.random.default_rng(1)
        s = rng.uniform(0, 1, size=200_000)
        h = histogram(s, binning=np.linspace(0, 1, 11))
        for d, c in zip(h.density, h.counts):
            stderr = np.sqrt(c) / (s.size * 0.1)
            assert abs(d - 1.0) < 3 * stderr

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            histogram([])

    def test_four_atoms(self):
        s = np.array([0.38, -0.62, 0.40, -0.60] * 50) + 0.0
        assert support_points(s) == 4


class TestConvergenceSeries:
    def test_constant_samples(self):
        series = convergence_series(np.zeros(10))
        assert np.all(series[:, 1] == 1.0)

    def test_final_point_matches_estimate(self, small_run):
        s = small_run.samples("s_tot")
        series = convergence_series(s)
        mean, _, _ = integral_ft_estimate(s)
        assert series[-1, 1] == pytest.approx(mean, rel=1e-12)
        assert series.shape == (len(s), 2)

    def test_adversarial_converges_away_from_one(self):
        series = convergence_series(np.full(500, -0.5))
        assert series[-1, 1] == pytest.approx(np.exp(0.5), rel=1e-12)


class TestConsistencyCheckpointing:
    def test_checkpoints_cover_zero_and_tau(self, small_run):
        t = small_run.checkpoint_times
        assert t[0] == 0.0
        assert t[-1] == pytest.approx(40.0)
        assert np.all(np.isfinite(small_run.trace_distances))
