"""Config files, the experiment runner, its outputs and the CLI."""

import logging

import numpy as np
import pytest

from ewkit.bounds import egpm_bound, kt_bound
from ewkit.cli import main
from ewkit.config import build_config, load_config, load_config_file, parse_config_lines
from ewkit.core import read_ledger_csv, run_experiment, run_replicate, sweep, write_ledger_csv
from ewkit.errors import ConfigError
from ewkit.models import AdversaryKind, AlgorithmId, Flavor, RegretLedger
from ewkit.suites import run_suite


def _config(**values):
    return build_config({key: str(value) for key, value in values.items()})


class TestConfig:
    def test_file_with_bom_and_comments(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_bytes("\ufeff# a KT run\nalgorithm = kt\nT = 50  # short\n\nseed = 7\n".encode("utf-8"))
        config = load_config(path)
        assert config.algorithm is AlgorithmId.KT
        assert config.adversary.T == 50
        assert config.adversary.seed == 7
        assert config.adversary.d == 1
        assert config.adversary.kind is AdversaryKind.LOG_LOSS_BERNOULLI

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("algorithm = gd\nT = 50\n", encoding="utf-8")
        config = load_config(path, {"T": 20, "flavor": "lazy"})
        assert config.adversary.T == 20
        assert config.flavor is Flavor.LAZY

    def test_defaults(self):
        config = build_config({})
        assert config.algorithm is AlgorithmId.GD
        assert config.adversary.d == 2
        assert config.adversary.T == 100
        assert config.flavor is Flavor.GREEDY

    def test_algo_alias(self):
        assert build_config({"algo": "ons"}).algorithm is AlgorithmId.ONS

    @pytest.mark.parametrize(
        "lines",
        [
            ["T = 10", "T = 20"],
            ["colour = red"],
            ["T 10"],
        ],
    )
    def test_malformed_files(self, lines):
        with pytest.raises(ConfigError):
            parse_config_lines(lines)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "nope.cfg")

    @pytest.mark.parametrize(
        "values",
        [
            {"algorithm": "kt", "adversary": "iid-linear"},
            {"algorithm": "kt", "d": "2"},
            {"algorithm": "iprod", "d": "1"},
            {"algorithm": "bandit", "T": "1"},
            {"algorithm": "bandit", "n_samples": "500"},
            {"algorithm": "ons", "schedule": "sqrt"},
            {"seed": "-1"},
            {"eta": "0"},
            {"flavor": "eager"},
            {"clip_regrets": "maybe"},
        ],
    )
    def test_invalid_combinations(self, values):
        with pytest.raises(ConfigError):
            build_config(values)


class TestRunner:
    @pytest.mark.parametrize(
        "algorithm",
        ["gd", "egpm", "md-poisson", "quad-ew", "sc-gd", "ons", "iprod", "squint", "coinbetting"],
    )
    def test_bounds_hold(self, algorithm):
        config = _config(algorithm=algorithm, d=3, T=60, grid_size=2000)
        result = run_experiment(config, write=False)
        assert not result.violated, result.summaries[0]
        assert len(result.ledgers[0]) == 60

    @pytest.mark.parametrize("algorithm", ["quad-ew", "sc-gd", "ons"])
    def test_lazy_quadratic_bounds_hold(self, algorithm):
        for seed in (1, 2):
            config = _config(algorithm=algorithm, d=3, T=100, flavor="lazy", seed=seed, grid_size=2000)
            assert config.flavor is Flavor.LAZY
            result = run_experiment(config, write=False)
            assert not result.violated, result.summaries[0]

    @pytest.mark.parametrize("flavor", ["lazy", "greedy"])
    def test_kt_headline(self, flavor):
        ledger, _ = run_replicate(_config(algorithm="kt", T=200, flavor=flavor))
        assert ledger.final.regret <= kt_bound(200) + 1e-9

    def test_egpm_headline(self):
        config = _config(algorithm="egpm", d=4, T=200, adversary="adaptive-linear")
        ledger, _ = run_replicate(config)
        assert ledger.final.regret <= egpm_bound(200, 4, 1.0) + 1e-9

    def test_zero_adversary_has_zero_regret(self):
        ledger, _ = run_replicate(_config(algorithm="gd", adversary="zero", T=30))
        assert all(row.regret == 0.0 for row in ledger.rows)

    def test_lazy_gd_bound_is_nondecreasing(self):
        ledger, _ = run_replicate(_config(algorithm="gd", flavor="lazy", T=100))
        bounds = np.array([row.bound for row in ledger.rows])
        assert np.all(np.diff(bounds) >= -1e-12)

    def test_bandit_short_run(self):
        config = _config(algorithm="bandit", d=2, T=50, moment_method="exact")
        result = run_experiment(config, write=False)
        assert result.stochastic
        assert np.isfinite(result.mean_final_regret)
        assert not result.violated

    def test_bandit_monte_carlo_run(self, caplog):
        caplog.set_level(logging.DEBUG, logger="ewkit")
        config = _config(algorithm="bandit", d=2, T=40, n_samples=1000, sampler_flag_tolerance=0.1)
        assert config.moment_method == "monte-carlo"
        ledger, learner = run_replicate(config)
        assert len(ledger) == 40
        assert learner.inner.posterior.draws >= 40
        assert learner.inner.posterior.chains.shape == (1000, 2)
        assert np.all(np.linalg.norm(learner.inner.posterior.chains, axis=1) <= 1.0 + 1e-9)
        result = run_experiment(config, write=False)
        assert np.isfinite(result.mean_final_regret)
        assert not result.violated
        assert all(r.levelno < logging.WARNING for r in caplog.records)

    def test_seeded_runs_repeat(self):
        config = _config(algorithm="squint", d=4, T=80, seed=3)
        a, _ = run_replicate(config)
        b, _ = run_replicate(config)
        assert [r.as_tuple() for r in a.rows] == [r.as_tuple() for r in b.rows]

    def test_threaded_replicates_match_serial(self):
        serial = run_experiment(_config(algorithm="gd", T=40, replicates=3, workers=1), write=False)
        threaded = run_experiment(_config(algorithm="gd", T=40, replicates=3, workers=2), write=False)
        assert [s.final_regret for s in serial.summaries] == [s.final_regret for s in threaded.summaries]


class TestOutputs:
    def test_csv_is_deterministic(self, tmp_path):
        for name in ("a", "b"):
            run_experiment(_config(algorithm="gd", T=30, out=tmp_path / name))
        first = (tmp_path / "a" / "ledger.csv").read_bytes()
        assert first == (tmp_path / "b" / "ledger.csv").read_bytes()
        assert (tmp_path / "a" / "regret.svg").exists()
        assert (tmp_path / "a" / "summary.txt").exists()

    def test_csv_layout(self, tmp_path):
        ledger = RegretLedger(algorithm="gd")
        for t in range(3):
            ledger.append(loss=0.1 * t, comparator_cum_loss=-0.5 * t, mix_gap=0.01, bound=1.0 / 3.0)
        path = write_ledger_csv(ledger, tmp_path / "ledger.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 4
        assert lines[0] == "t,loss,cum_loss,comparator_cum_loss,regret,mix_gap,bound"
        back = read_ledger_csv(path)
        assert [r.as_tuple() for r in back.rows] == [r.as_tuple() for r in ledger.rows]

    def test_empty_ledger(self, tmp_path):
        with pytest.raises(ValueError):
            write_ledger_csv(RegretLedger(algorithm="gd"), tmp_path / "ledger.csv")

    def test_replicate_folders_and_summary(self, tmp_path):
        run_experiment(_config(algorithm="gd", T=20, replicates=2, out=tmp_path))
        assert (tmp_path / "rep-000" / "ledger.csv").exists()
        assert (tmp_path / "rep-001" / "ledger.csv").exists()
        summary = (tmp_path / "summary.txt").read_text(encoding="utf-8")
        assert "algorithm = gd" in summary
        assert "violated = false" in summary

    def test_sweep_table(self, tmp_path):
        results = sweep({"algorithm": "gd", "T": "20"}, "eta", ["0.1", "0.2"], tmp_path)
        assert len(results) == 2
        table = (tmp_path / "sweep.txt").read_text(encoding="utf-8").splitlines()
        assert table[0].split("\t") == ["eta", "final_regret", "final_bound", "slack", "violated"]
        assert [line.split("\t")[0] for line in table[1:]] == ["0.1", "0.2"]
        assert (tmp_path / "eta=0.1" / "ledger.csv").exists()
        assert results[0].config.eta == pytest.approx(0.1)


class TestCli:
    def test_run(self, tmp_path, capsys):
        code = main(["run", "--algo", "gd", "--set", "T=20", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "ledger.csv").exists()
        assert "Final regret" in capsys.readouterr().out

    def test_key_flags_override_file_and_set(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("algorithm = kt\nT = 50\n", encoding="utf-8")
        out = tmp_path / "run"
        argv = ["run", "--config", str(cfg), "--set", "T=40", "--T", "20", "--flavor", "lazy", "--out", str(out)]
        assert main(argv) == 0
        ledger = read_ledger_csv(out / "ledger.csv")
        assert len(ledger) == 20
        assert "algorithm = kt" in (out / "summary.txt").read_text(encoding="utf-8")

    def test_key_flags_take_both_spellings(self, tmp_path):
        code = main(["run", "--algorithm", "gd", "--T", "15", "--grid-size", "500", "--sigma2", "2", "--out", str(tmp_path)])
        assert code == 0
        assert len(read_ledger_csv(tmp_path / "ledger.csv")) == 15
        assert main(["run", "--algorithm", "gd", "--T", "15", "--eta_prior", "inverse", "--out", str(tmp_path / "b")]) == 0

    def test_unknown_key(self, tmp_path, capsys):
        assert main(["run", "--set", "bogus=1", "--out", str(tmp_path)]) == 2
        assert "Error:" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2

    def test_sweep(self, tmp_path):
        assert main(["sweep", "--algo", "kt", "--set", "T=30", "--param", "seed", "--values", "1,2", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "sweep.txt").exists()

    def test_unknown_suite(self):
        with pytest.raises(SystemExit):
            main(["verify", "--suite", "nope"])
        with pytest.raises(ConfigError):
            run_suite("nope")

