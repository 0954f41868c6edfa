"""Command-line interface: config schema, subcommands, exit codes."""

import json

import numpy as np
import pytest

from smcsa.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_SINGULAR,
    ConfigError,
    main,
    parse_config_text,
)
from smcsa.experiments import (
    CANONICAL_SEED,
    gen_ht0,
    gen_lidar_surrogate,
    load_dataset_csv,
    monotone_spline_problem,
    qp_oracle_monotone_spline,
    scale_by_max,
)
from smcsa.models import design_matrix

RATIONAL_CONFIG = """\
schema_version = 1
dataset = ht0
model = rational
algorithm = smcsa
schedule = reciprocal
schedule.alpha = 0.95
proposal = kpoint
proposal.k_points = 2
proposal.sigma0 = 1.0
proposal.decay = 0.97
n_states = 20
iterations = 5
replications = 2
seed = 1729
"""

SPLINE_CONFIG = """\
schema_version = 1
dataset = lidar-surrogate
dataset.x_scale = max
dataset.y_scale = max
model = bspline
constraint.direction = decreasing
constraint.lo = 0.0
constraint.hi = 1.0
algorithm = smcsa
n_states = 20
iterations = 5
replications = 1
"""


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigParsing:
    def test_defaults_and_explicit_tracking(self):
        values, explicit = parse_config_text("schema_version = 1\nn_states = 64\n")
        assert values["n_states"] == 64
        assert values["iterations"] == 100  # schema default
        assert values["seed"] == CANONICAL_SEED
        assert explicit == {"schema_version", "n_states"}

    def test_comments_and_blank_lines(self):
        text = "# a comment\n\nschema_version = 1\n  # indented comment\n"
        values, _ = parse_config_text(text)
        assert values["schema_version"] == 1

    def test_missing_schema_version(self):
        with pytest.raises(ConfigError, match="schema_version"):
            parse_config_text("n_states = 5\n")

    def test_unsupported_schema_version(self):
        with pytest.raises(ConfigError, match="unsupported"):
            parse_config_text("schema_version = 2\n")

    def test_unknown_key_with_location(self):
        with pytest.raises(ConfigError, match=r"<config>:2.*population"):
            parse_config_text("schema_version = 1\npopulation = 5\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("schema_version = 1\nseed = 1\nseed = 2\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config_text("schema_version = 1\njust some words\n")

    def test_bad_values(self):
        with pytest.raises(ConfigError, match="n_states"):
            parse_config_text("schema_version = 1\nn_states = many\n")
        with pytest.raises(ConfigError, match="loss"):
            parse_config_text("schema_version = 1\nloss = huber\n")
        with pytest.raises(ConfigError, match="finite"):
            parse_config_text("schema_version = 1\nloss.c = inf\n")

    def test_origin_parsing(self):
        values, _ = parse_config_text(
            "schema_version = 1\nstart.origin = 1.0, 2.0, 3\n")
        assert values["start.origin"] == (1.0, 2.0, 3.0)
        values, _ = parse_config_text("schema_version = 1\nstart.origin = crude\n")
        assert values["start.origin"] is None


class TestGendata:
    def test_stdout_matches_generator(self, capsys):
        assert main(["gendata", "--name", "ht0", "--seed", "11"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "x,y"
        data = gen_ht0(11)
        first = lines[1].split(",")
        assert float(first[0]) == data.x[0]
        assert float(first[1]) == data.y[0]
        assert len(lines) == 31

    def test_written_file_round_trips(self, tmp_path, capsys):
        out = tmp_path / "ht1.csv"
        assert main(["gendata", "--name", "ht1", "--out", str(out)]) == EXIT_OK
        back = load_dataset_csv(out)
        assert back.y[1] == 2.0 and back.y[27] == 0.0
        assert "wrote 30 rows" in capsys.readouterr().err

    def test_quiet_suppresses_note(self, tmp_path, capsys):
        out = tmp_path / "d.csv"
        main(["gendata", "--name", "lidar-surrogate", "--out", str(out), "--quiet"])
        assert capsys.readouterr().err == ""

    def test_unknown_name_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            main(["gendata", "--name", "melon"])


class TestFit:
    def test_report_structure(self, tmp_path):
        cfg = write_config(tmp_path, RATIONAL_CONFIG)
        out = tmp_path / "fit.json"
        assert main(["fit", "--config", cfg, "--out", str(out), "--quiet"]) == EXIT_OK
        report = json.loads(out.read_text())
        assert report["schema_version"] == 1
        assert report["command"] == "fit"
        assert report["algorithm"] == "smcsa"
        assert report["seed"] == 1729
        assert len(report["best_state"]) == 5
        assert np.isfinite(report["best_loss"])
        assert len(report["trace"]) == 6
        losses = [l for _, l in report["trace"]]
        assert losses == sorted(losses, reverse=True) or all(
            b <= a for a, b in zip(losses, losses[1:]))
        assert report["config"]["n_states"] == 20

    def test_deterministic_given_seed(self, tmp_path):
        cfg = write_config(tmp_path, RATIONAL_CONFIG)
        reports = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            assert main(["fit", "--config", cfg, "--out", str(out),
                         "--quiet"]) == EXIT_OK
            report = json.loads(out.read_text())
            report.pop("wall_time_s")
            reports.append(report)
        assert reports[0] == reports[1]

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path, RATIONAL_CONFIG)
        out = tmp_path / "s.json"
        assert main(["fit", "--config", cfg, "--seed", "99", "--out", str(out),
                     "--quiet"]) == EXIT_OK
        report = json.loads(out.read_text())
        assert report["seed"] == 99

    def test_threads_do_not_change_answer(self, tmp_path):
        cfg = write_config(tmp_path, RATIONAL_CONFIG)
        losses = []
        for threads in ("1", "3"):
            out = tmp_path / f"t{threads}.json"
            assert main(["fit", "--config", cfg, "--threads", threads,
                         "--out", str(out), "--quiet"]) == EXIT_OK
            losses.append(json.loads(out.read_text())["best_loss"])
        assert losses[0] == losses[1]

    def test_stdout_report_when_no_out(self, tmp_path, capsys):
        cfg = write_config(tmp_path, RATIONAL_CONFIG)
        assert main(["fit", "--config", cfg, "--quiet"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["command"] == "fit"

    def test_progress_lines(self, tmp_path, capsys):
        cfg = write_config(tmp_path, RATIONAL_CONFIG + "progress_every = 2\n")
        assert main(["fit", "--config", cfg]) == EXIT_OK
        err = capsys.readouterr().err
        assert "iteration 2/5" in err and "iteration 5/5" in err

    def test_spline_fit_runs(self, tmp_path):
        cfg = write_config(tmp_path, SPLINE_CONFIG)
        out = tmp_path / "spline.json"
        assert main(["fit", "--config", cfg, "--out", str(out), "--quiet"]) == EXIT_OK
        report = json.loads(out.read_text())
        assert len(report["best_state"]) == 7
        assert np.all(np.diff(report["best_state"]) <= 0.0)


class TestBench:
    def test_compares_algorithms(self, tmp_path, capsys):
        cfg = write_config(tmp_path,
                           RATIONAL_CONFIG.replace("algorithm = smcsa",
                                                   "algorithm = smcsa, multistart"))
        out_dir = tmp_path / "bench"
        assert main(["bench", "--config", cfg, "--out", str(out_dir)]) == EXIT_OK
        runs = (out_dir / "runs.csv").read_text().splitlines()
        assert runs[0].startswith("algorithm,replication,status")
        assert len(runs) == 5  # two algorithms x two replications
        assert all(",ok," in line for line in runs[1:])
        summary = (out_dir / "summary.csv").read_text().splitlines()
        assert len(summary) == 3
        assert {line.split(",")[0] for line in summary[1:]} == {"smcsa", "multistart"}
        assert "configuration" in (out_dir / "summary.txt").read_text()
        assert "smcsa" in capsys.readouterr().out

    def test_quiet_silences_stdout(self, tmp_path, capsys):
        cfg = write_config(tmp_path, RATIONAL_CONFIG)
        out_dir = tmp_path / "bench"
        assert main(["bench", "--config", cfg, "--out", str(out_dir),
                     "--quiet"]) == EXIT_OK
        assert capsys.readouterr().out == ""

    def test_duplicate_algorithms_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path,
                           RATIONAL_CONFIG.replace("algorithm = smcsa",
                                                   "algorithm = smcsa, smcsa"))
        assert main(["bench", "--config", cfg, "--out",
                     str(tmp_path / "b")]) == EXIT_CONFIG


class TestOracle:
    def test_matches_direct_oracle(self, tmp_path):
        cfg = write_config(tmp_path, SPLINE_CONFIG)
        out = tmp_path / "oracle.json"
        assert main(["oracle", "--config", cfg, "--out", str(out)]) == EXIT_OK
        report = json.loads(out.read_text())
        data = scale_by_max(gen_lidar_surrogate(CANONICAL_SEED))
        _, basis = monotone_spline_problem(data, direction="decreasing")
        design = design_matrix(basis, data.x)
        beta = qp_oracle_monotone_spline(design, data.y, "decreasing")
        np.testing.assert_allclose(report["coefficients"], beta, atol=1e-12)
        resid = data.y - design @ beta
        assert report["objective"] == pytest.approx(float(resid @ resid))
        assert np.all(np.diff(report["coefficients"]) <= 1e-12)
        assert report["n_basis"] == 7

    def test_requires_spline_model(self, tmp_path, capsys):
        cfg = write_config(tmp_path, RATIONAL_CONFIG)
        assert main(["oracle", "--config", cfg]) == EXIT_CONFIG
        assert "bspline" in capsys.readouterr().err


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["fit", "--config", str(tmp_path / "nope.cfg")])
        assert code == EXIT_CONFIG
        assert "error" in capsys.readouterr().err

    def test_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "schema_version = 1\nn_states = lots\n")
        assert main(["fit", "--config", cfg]) == EXIT_CONFIG

    def test_contradictory_keys(self, tmp_path):
        cfg = write_config(tmp_path,
                           "schema_version = 1\nschedule = logarithm\n"
                           "schedule.alpha = 0.9\n")
        assert main(["fit", "--config", cfg]) == EXIT_CONFIG
        cfg = write_config(tmp_path,
                           "schema_version = 1\nproposal = full\n"
                           "proposal.k_points = 2\n", name="p.cfg")
        assert main(["fit", "--config", cfg]) == EXIT_CONFIG

    def test_fit_requires_single_algorithm(self, tmp_path):
        cfg = write_config(tmp_path,
                           RATIONAL_CONFIG.replace("algorithm = smcsa",
                                                   "algorithm = smcsa, multistart"))
        assert main(["fit", "--config", cfg]) == EXIT_CONFIG

    def test_csv_without_path(self, tmp_path):
        cfg = write_config(tmp_path, "schema_version = 1\ndataset = csv\n")
        assert main(["fit", "--config", cfg]) == EXIT_CONFIG

    def test_missing_dataset_file(self, tmp_path):
        cfg = write_config(tmp_path,
                           "schema_version = 1\ndataset = csv\n"
                           f"dataset.path = {tmp_path / 'gone.csv'}\n")
        assert main(["fit", "--config", cfg]) == EXIT_DATA

    def test_malformed_dataset(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,two\n")
        cfg = write_config(tmp_path,
                           "schema_version = 1\ndataset = csv\n"
                           f"dataset.path = {bad}\n"
                           "n_states = 5\niterations = 2\n")
        assert main(["fit", "--config", cfg]) == EXIT_DATA

    def test_infeasible_start_generation(self, tmp_path, capsys):
        # a decreasing-ordered origin with a vanishing scatter scale can
        # never satisfy the increasing constraint
        text = (
            "schema_version = 1\n"
            "dataset = lidar-surrogate\n"
            "dataset.x_scale = max\ndataset.y_scale = max\n"
            "model = bspline\n"
            "constraint.direction = increasing\n"
            "constraint.lo = 0.0\nconstraint.hi = 1.0\n"
            "start.origin = 7, 6, 5, 4, 3, 2, 1\n"
            "start.scale = 1e-12\n"
            "start.max_attempts = 40\n"
            "n_states = 4\niterations = 2\n"
        )
        cfg = write_config(tmp_path, text)
        assert main(["fit", "--config", cfg]) == EXIT_INFEASIBLE
        assert "feasible" in capsys.readouterr().err

    def test_singular_crude_estimate(self, tmp_path):
        flat = tmp_path / "flat.csv"
        rows = "\n".join(f"{x},2.0" for x in np.linspace(0.0, 6.0, 20))
        flat.write_text("x,y\n" + rows + "\n")
        cfg = write_config(tmp_path,
                           "schema_version = 1\ndataset = csv\n"
                           f"dataset.path = {flat}\n"
                           "n_states = 5\niterations = 2\n")
        assert main(["fit", "--config", cfg]) == EXIT_SINGULAR

    def test_unwritable_output(self, tmp_path, capsys):
        cfg = write_config(tmp_path, RATIONAL_CONFIG)
        out = tmp_path / "no" / "such" / "dir" / "fit.json"
        assert main(["fit", "--config", cfg, "--out", str(out),
                     "--quiet"]) == EXIT_DATA
