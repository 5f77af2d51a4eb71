import csv

import numpy as np
import pytest

from parni.cli import main
from parni.exact import enumerate_exact
from parni.io import (
    ConfigError,
    DataError,
    RunConfig,
    ingest_csv,
    read_config_file,
    resolve_run_config,
    write_sim_csv,
)
from parni.models import ModelIndicator, PriorConfig, build_dataset
from parni.report import average_mse, thin_to_count, write_report
from parni.sampler import ChainConfig, run_chain
from parni.simulate import SimConfig, simulate


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestConfigParsing:
    def test_key_value_lines_and_comments(self, tmp_path):
        p = write(tmp_path / "c.txt", "# comment\nkind = logistic\niters=50\nsim = true\n")
        mapping = read_config_file(p)
        assert mapping == {"kind": "logistic", "iters": "50", "sim": "true"}

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            resolve_run_config({"sim": "true", "totally_bogus": "1"})

    def test_model_prior_forms(self):
        cfg = resolve_run_config({"sim": "true", "model_prior": "fixed:0.1"})
        assert cfg.h == 0.1
        cfg = resolve_run_config({"sim": "true", "model_prior": "betabin:1,19"})
        assert cfg.beta_binomial == (1.0, 19.0)
        with pytest.raises(ConfigError):
            resolve_run_config({"sim": "true", "model_prior": "dirichlet:1"})

    def test_da_requires_logistic(self):
        with pytest.raises(ConfigError):
            resolve_run_config({"sim": "true", "kind": "cox", "acceptance": "da"})

    def test_hierarchical_g(self):
        cfg = resolve_run_config({"sim": "true", "g": "hierarchical"})
        assert cfg.hierarchical_g

    def test_kind_alias(self):
        cfg = resolve_run_config({"sim": "true", "kind": "cox-partial"})
        assert cfg.kind == "cox"

    def test_burn_in_bound(self):
        with pytest.raises(ConfigError):
            resolve_run_config({"sim": "true", "iters": "100", "burn_in": "100"})


class TestIngest:
    def test_three_row_logistic(self, tmp_path):
        p = write(tmp_path / "d.csv", "y,a,b\n1,0.5,2.0\n0,1.5,0.0\n1,-0.5,1.0\n")
        cfg = resolve_run_config({"data": p, "kind": "logistic", "response": "y"})
        data = ingest_csv(p, cfg)
        assert data.n == 3 and data.p == 2
        assert data.names == ("a", "b")

    def test_nonpositive_time_names_row(self, tmp_path):
        p = write(tmp_path / "d.csv", "time,event,a\n1.0,1,0.3\n0.0,0,0.4\n2.0,1,0.1\n")
        cfg = resolve_run_config({"data": p, "kind": "cox"})
        with pytest.raises(DataError, match="row 3"):
            ingest_csv(p, cfg)

    def test_non_numeric_cell_named(self, tmp_path):
        p = write(tmp_path / "d.csv", "y,a\n1,0.5\n0,oops\n")
        cfg = resolve_run_config({"data": p, "kind": "logistic"})
        with pytest.raises(DataError, match="row 3.*'a'"):
            ingest_csv(p, cfg)

    def test_missing_column(self, tmp_path):
        p = write(tmp_path / "d.csv", "z,a\n1,0.5\n0,0.2\n")
        cfg = resolve_run_config({"data": p, "kind": "logistic", "response": "y"})
        with pytest.raises(DataError, match="missing column 'y'"):
            ingest_csv(p, cfg)

    def test_constant_column_rejected(self, tmp_path):
        p = write(tmp_path / "d.csv", "y,a,b\n1,0.5,7\n0,1.5,7\n1,-0.5,7\n")
        cfg = resolve_run_config({"data": p, "kind": "logistic"})
        with pytest.raises(DataError, match="constant"):
            ingest_csv(p, cfg)

    def test_fixed_and_free_selection(self, tmp_path):
        p = write(tmp_path / "d.csv", "y,z1,a,b\n1,3,0.5,2\n0,1,1.5,0\n1,2,-0.5,1\n0,0,0.1,4\n")
        cfg = resolve_run_config(
            {"data": p, "kind": "logistic", "fixed": "z1", "free": "a,b"}
        )
        data = ingest_csv(p, cfg)
        assert data.q == 1 and data.p == 2

    def test_round_trip_matches_library_build(self, tmp_path):
        sim = simulate(SimConfig(n=40, p=5, kind="cox", seed=3))
        cfg = resolve_run_config({"kind": "cox", "sim": "true"})
        path = tmp_path / "sim.csv"
        write_sim_csv(path, cfg, sim)
        cfg2 = resolve_run_config({"kind": "cox", "data": str(path)})
        data = ingest_csv(path, cfg2)
        direct = build_dataset("cox", sim.X, time=sim.time, event=sim.event, standardize=True)
        np.testing.assert_allclose(data.X, direct.X, atol=1e-12)
        np.testing.assert_allclose(data.time, direct.time, atol=1e-12)
        np.testing.assert_allclose(data.event, direct.event, atol=1e-12)


class TestEnumerate:
    def test_single_covariate_hand_computation(self, rng):
        from parni.estimators import log_marglik_la
        from scipy.special import expit

        X = rng.standard_normal((30, 1))
        y = (rng.random(30) < expit(X[:, 0])).astype(float)
        data = build_dataset("logistic", X, y=y, standardize=False)
        prior = PriorConfig(g=1.0, h=0.4)
        post = enumerate_exact(data, prior)
        l0 = log_marglik_la(data, ModelIndicator.empty(1), prior).log_value + np.log(0.6)
        l1 = log_marglik_la(data, ModelIndicator.full(1), prior).log_value + np.log(0.4)
        odds = np.exp(l1 - l0)
        assert post.pip[0] == pytest.approx(odds / (1 + odds), abs=1e-12)

    def test_duplicate_columns_symmetric(self, rng):
        x = rng.standard_normal(40)
        X = np.column_stack([x, x])
        y = (rng.random(40) < 0.5).astype(float)
        data = build_dataset("logistic", X, y=y, standardize=False)
        post = enumerate_exact(data, PriorConfig(g=1.0, h=0.3))
        assert post.pip[0] == pytest.approx(post.pip[1], abs=1e-12)

    def test_pmp_normalization(self, p8_fixture):
        data, prior = p8_fixture
        post = enumerate_exact(data, prior)
        assert np.exp(post.log_pmp).sum() == pytest.approx(1.0, abs=1e-12)

    def test_p_cap(self, rng):
        X = rng.standard_normal((10, 5))
        y = (rng.random(10) < 0.5).astype(float)
        data = build_dataset("logistic", X, y=y, standardize=False)
        with pytest.raises(ValueError):
            enumerate_exact(data, PriorConfig(g=1.0, h=0.5), max_p=3)


class TestReport:
    def _toy_outputs(self, p8_fixture, n=2, iters=300):
        data, prior = p8_fixture
        cfg = ChainConfig(n_iter=iters, burn_in=50, proposal="la", acceptance="la", thin=3)
        return [
            run_chain(data, prior, cfg, np.random.default_rng(s)) for s in range(n)
        ], data

    def test_identical_chains_zero_mse(self, tmp_path, p8_fixture):
        outs, data = self._toy_outputs(p8_fixture, n=1)
        outs = [outs[0], outs[0]]
        write_report(tmp_path, outs, labels=["a", "a"], gold=outs[0].pip, names=data.names)
        rows = list(csv.DictReader(open(tmp_path / "summary.csv")))
        per_chain = [r for r in rows if r["chain"] != "all"]
        assert all(float(r["avg_mse"]) == 0.0 for r in per_chain)

    def test_relative_efficiency_hand_check(self, tmp_path):
        from parni.sampler import ChainOutput

        def fake(pip):
            return ChainOutput(
                models=np.zeros((1, 2), dtype=np.uint8), iterations=np.array([0]),
                log_post=np.array([0.0]), accepted=np.array([1], dtype=np.uint8),
                cum_seconds=np.array([0.0]), pip=np.array(pip), n_iter=10, burn_in=0,
                thin=1, acceptance_rate=0.5, estimator_failures=0, total_seconds=1.0,
                total_cpu_seconds=1.0, meta={},
            )

        gold = np.array([0.5, 0.5])
        base = fake([0.7, 0.3])   # avg mse = 0.04
        other = fake([0.6, 0.4])  # avg mse = 0.01
        write_report(tmp_path, [base, other], labels=["base", "new"], gold=gold, baseline="base")
        rows = {r["label"]: r for r in csv.DictReader(open(tmp_path / "summary.csv")) if r["chain"] == "all"}
        assert float(rows["base"]["avg_mse"]) == pytest.approx(0.04)
        assert float(rows["new"]["avg_mse"]) == pytest.approx(0.01)
        assert float(rows["new"]["rel_efficiency"]) == pytest.approx(4.0)
        assert average_mse(np.array([0.7, 0.3]), gold) == pytest.approx(0.04)

    def test_thin_to_count(self, p8_fixture):
        outs, _ = self._toy_outputs(p8_fixture, n=1, iters=300)
        thinned = thin_to_count(outs[0], 20)
        assert thinned.iterations.size <= 20
        np.testing.assert_array_equal(thinned.pip, outs[0].pip)

    def test_trace_has_no_timing_column(self, tmp_path, p8_fixture):
        outs, data = self._toy_outputs(p8_fixture, n=1)
        write_report(tmp_path, outs, labels=["x"], names=data.names)
        header = open(tmp_path / "trace.csv").readline().strip().split(",")
        assert header == ["chain", "iteration", "log_posterior", "accepted"]
        timing_header = open(tmp_path / "timing.csv").readline().strip().split(",")
        assert timing_header == ["chain", "iteration", "cum_seconds"]


class TestCli:
    def _base_config(self, tmp_path, extra=""):
        return write(
            tmp_path / "run.txt",
            "mode = run\nkind = logistic\nsim = true\nsim_n = 60\nsim_p = 5\n"
            "sampler = parni\nproposal = la\nacceptance = la\n"
            "iters = 200\nburn_in = 40\nchains = 1\nseed = 7\n"
            f"out = {tmp_path}/out\n" + extra,
        )

    def test_successful_run_exit_zero(self, tmp_path):
        cfg = self._base_config(tmp_path)
        assert main([cfg]) == 0
        assert (tmp_path / "out" / "pip.csv").exists()
        assert (tmp_path / "out" / "trace.csv").exists()
        assert (tmp_path / "out" / "summary.csv").exists()
        assert (tmp_path / "out" / "run.txt").exists()

    def test_config_error_exit_two(self, tmp_path):
        cfg = write(tmp_path / "bad.txt", "mode = run\nkind = klingon\nsim = true\n")
        assert main([cfg]) == 2

    def test_missing_data_exit_three(self, tmp_path):
        cfg = write(
            tmp_path / "nodata.txt",
            "mode = run\nkind = logistic\ndata = /nonexistent/x.csv\niters = 10\nburn_in = 2\n",
        )
        assert main([cfg]) == 3

    def test_cli_overrides(self, tmp_path):
        cfg = self._base_config(tmp_path)
        out2 = str(tmp_path / "out2")
        assert main([cfg, "--iters", "100", "--seed", "9", "--out", out2]) == 0
        import pathlib

        meta = pathlib.Path(out2, "run.txt").read_text()
        assert "iters=100" in meta and "seed=9" in meta

    def test_enumerate_mode(self, tmp_path):
        cfg = write(
            tmp_path / "enum.txt",
            "mode = enumerate\nkind = logistic\nsim = true\nsim_n = 50\nsim_p = 4\n"
            f"out = {tmp_path}/enum\n",
        )
        assert main([cfg]) == 0
        rows = list(csv.DictReader(open(tmp_path / "enum" / "exact_pip.csv")))
        assert len(rows) == 4
        pmps = list(csv.DictReader(open(tmp_path / "enum" / "exact_pmp.csv")))
        total = sum(np.exp(float(r["log_pmp"])) for r in pmps)
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_simulate_mode_round_trips(self, tmp_path):
        cfg = write(
            tmp_path / "sim.txt",
            f"mode = simulate\nkind = weibull\nsim_n = 30\nsim_p = 3\nseed = 5\nout = {tmp_path}/simout\n",
        )
        assert main([cfg]) == 0
        data_path = tmp_path / "simout" / "data.csv"
        cfg2 = resolve_run_config({"kind": "weibull", "data": str(data_path)})
        data = ingest_csv(data_path, cfg2)
        assert data.n == 30 and data.p == 3

    def test_reproducible_outputs(self, tmp_path):
        cfg = self._base_config(tmp_path)
        out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
        assert main([cfg, "--out", out_a]) == 0
        assert main([cfg, "--out", out_b]) == 0
        for name in ("pip.csv", "trace.csv"):
            a = open(f"{out_a}/{name}", "rb").read()
            b = open(f"{out_b}/{name}", "rb").read()
            assert a == b

    def test_gold_enumerate_and_budget_thinning(self, tmp_path):
        cfg = self._base_config(
            tmp_path,
            extra="gold = enumerate\nbaseline = parni-la\nbudget_seconds = 0.5\nthin_to = 50\n",
        )
        out3 = str(tmp_path / "out3")
        assert main([cfg, "--out", out3]) == 0
        trace = list(csv.DictReader(open(f"{out3}/trace.csv")))
        assert len(trace) <= 50
        rows = {r["label"]: r for r in csv.DictReader(open(f"{out3}/summary.csv")) if r["chain"] == "all"}
        assert rows["parni-la"]["avg_mse"] != ""
