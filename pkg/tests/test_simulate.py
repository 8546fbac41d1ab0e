import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import mc_se
from progadjust.learn import ForestConfig
from progadjust.simulate import (RECORD_FIELDS, ExperimentConfig, ExperimentResults,
                                 ReplicationRecord, fast_config, read_records, records_checksum,
                                 run_experiment, run_replication, summarize_experiment,
                                 write_records)


def tiny(**kw):
    base = dict(r2_values=(0.5,), n_hist_values=(30, 200), n_trial=200, replications=4,
                eval_size=2000, forest=ForestConfig(n_trees=10), master_seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def tiny_results():
    return run_experiment(tiny())


class TestConfig:
    def test_fast_mode(self):
        c = fast_config()
        assert c.r2_values == (0.2, 0.5, 0.8)
        assert c.n_hist_values == (50, 100, 2000)
        assert c.replications == 200 and c.n_trial == 1000
        assert fast_config(replications=5).replications == 5

    def test_defaults(self):
        c = ExperimentConfig()
        assert c.r2_values == tuple(round(0.1 * i, 1) for i in range(1, 10))
        assert c.n_hist_values == (50, 100, 10000)
        assert c.replications == 1000 and c.eval_size == 100_000 and c.beta == 0.12

    @pytest.mark.parametrize("kw", [dict(r2_values=()), dict(r2_values=(1.0,)),
                                    dict(replications=0), dict(n_trial=101),
                                    dict(eval_size=10), dict(sigma2=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            tiny(**kw)

    def test_dict_roundtrip(self):
        c = tiny()
        assert ExperimentConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c

    def test_params(self):
        p = tiny(sigma2=2.0).params(0.5)
        assert p.pi ** 2 == pytest.approx(1.0) and p.beta == 0.12


class TestReplication:
    def test_pure_function_of_coordinates(self, tiny_results):
        again = run_replication(tiny(), 0.5, 200, 2)
        stored = [r for r in tiny_results.records if r.n_hist == 200 and r.rep == 2]
        assert stored == [again]

    def test_unknown_cell(self):
        with pytest.raises(ValueError):
            run_replication(tiny(), 0.3, 30, 0)

    def test_record_sanity(self, tiny_results):
        for r in tiny_results.records:
            assert r.var_adj <= r.var_unadj * 1.01
            assert 0.0 <= r.rho_hat <= 1.0
            assert r.r2_oos_hat <= 0.5 + 0.05
            assert r.se_adj > 0 and r.se_unadj > 0

    @pytest.mark.filterwarnings("ignore:negative score correlation")
    def test_zero_r2_score_useless(self):
        res = run_experiment(tiny(r2_values=(0.0,), n_hist_values=(200,)))
        assert np.all(res.column("rho_hat") < 0.3)
        assert np.all(res.column("r2_oos_hat") < 0.02)


class TestExperiment:
    def test_ordering_and_counts(self, tiny_results):
        keys = [(r.n_hist, r.rep) for r in tiny_results.records]
        assert keys == [(30, i) for i in range(4)] + [(200, i) for i in range(4)]
        assert not tiny_results.failures

    def test_worker_count_irrelevant(self, tiny_results, tmp_path):
        parallel = run_experiment(tiny(), workers=2, chunk_size=3)
        assert parallel.records == tiny_results.records
        write_records(parallel.records, tmp_path / "a.csv")
        write_records(tiny_results.records, tmp_path / "b.csv")
        assert records_checksum(tmp_path / "a.csv") == records_checksum(tmp_path / "b.csv")

    def test_seed_matters(self, tiny_results):
        other = run_experiment(tiny(master_seed=12, n_hist_values=(30,)))
        assert other.records[0] != tiny_results.records[0]

    def test_failures_recorded_and_run_continues(self):
        # n_hist below 2 * min_node_size makes every forest fit fail in that cell
        res = run_experiment(tiny(n_hist_values=(12, 30), replications=2,
                                  forest=ForestConfig(n_trees=5, min_node_size=7)))
        assert len(res.failures) == 2
        assert all("n_hist=12" in f for f in res.failures)
        assert {r.n_hist for r in res.records} == {30}

    def test_progress_callback(self):
        calls = []
        run_experiment(tiny(n_hist_values=(30,), replications=3), chunk_size=2,
                       progress=lambda d, t: calls.append((d, t)))
        assert calls == [(1, 2), (2, 2)]


class TestPersistence:
    def test_records_roundtrip(self, tiny_results, tmp_path):
        path = tmp_path / "records.csv"
        write_records(tiny_results.records, path)
        assert read_records(path) == tiny_results.records
        assert path.read_text().splitlines()[0] == ",".join(RECORD_FIELDS)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "records.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_records(path)

    def test_save_load(self, tiny_results, tmp_path):
        out = tiny_results.save(tmp_path / "run")
        loaded = ExperimentResults.load(out)
        assert loaded.config == tiny_results.config
        assert loaded.records == tiny_results.records
        stored = json.loads((out / "summary.json").read_text())["cells"]
        recomputed = [s.to_dict() for s in loaded.summaries]
        assert json.loads(json.dumps(recomputed)) == stored

    def test_load_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ExperimentResults.load(tmp_path)


class TestSummary:
    def test_overlays(self, tiny_results):
        for s in tiny_results.summaries:
            rho = tiny_results.column("rho_hat", s.r2, s.n_hist)
            r2oos = tiny_results.column("r2_oos_hat", s.r2, s.n_hist)
            assert s.overlay_theory == pytest.approx(1 - s.r2 * np.median(rho) ** 2)
            assert s.overlay_design == pytest.approx(1 - np.median(r2oos))
            assert s.fraction.median == pytest.approx(
                np.median(tiny_results.column("var_adj", s.r2, s.n_hist)))
            assert s.count == 4

    def test_quantiles(self, tiny_results):
        s = tiny_results.cell(0.5, 30)
        col = tiny_results.column("beta_adj", 0.5, 30)
        assert_allclose(list(s.beta_adj.quantiles.values()),
                        np.quantile(col, [0.05, 0.25, 0.5, 0.75, 0.95]))
        assert s.beta_adj.mean == pytest.approx(col.mean())
        with pytest.raises(KeyError):
            tiny_results.cell(0.5, 31)

    def test_single_record(self):
        rec = ReplicationRecord(0.5, 50, 0, 1.1, 0.7, 0.1, 0.12, 0.06, 0.05, 0.8, 0.3)
        s = summarize_experiment(ExperimentResults(tiny(), [rec]))[0]
        assert s.fraction.median == 0.7
        assert s.beta_adj.median == 0.12
        assert s.overlay_theory == pytest.approx(1 - 0.5 * 0.64)

    def test_empty(self):
        with pytest.raises(ValueError):
            summarize_experiment(ExperimentResults(tiny(), []))


@pytest.fixture(scope="module")
def mc_results():
    return run_experiment(tiny(r2_values=(0.6,), n_hist_values=(400,), n_trial=400,
                               replications=60, master_seed=5))


@pytest.mark.slow
class TestStatisticalInvariants:
    def test_unadjusted_variance_is_marginal(self, mc_results):
        v = mc_results.column("var_unadj")
        assert abs(v.mean() - 1.0) < 3 * mc_se(v)

    def test_adjusted_effect_unbiased(self, mc_results):
        b = mc_results.column("beta_adj")
        assert abs(b.mean() - 0.12) < 3 * mc_se(b)

    def test_adjustment_shrinks_standard_errors(self, mc_results):
        assert mc_results.column("se_adj").mean() < mc_results.column("se_unadj").mean()
