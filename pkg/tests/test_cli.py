import csv
import json

import numpy as np
import pytest

from dynal.cli import main
from dynal.experiment import (
    ConfigError,
    RESULT_COLUMNS,
    improvement_pct,
    parse_config,
    pool_seed,
    run_seed,
    validate_config,
)


def write_config(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


FAST_CONFIG = """\
oracle: [f2, f4]
strategies:
  - kind: random
  - kind: explore
    explore_kind: maxvar
  - kind: static
    eta: 0.5
budget: 2
n_initial: 3
repetitions: 1
pool:
  grid_1d: 60
  grid_2d: 8
gpr:
  restarts: 1
mcmc:
  iterations: 20
master_seed: 11
"""


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestParseConfig:
    def test_minimal_config(self):
        cfg = parse_config({"oracle": "f1",
                            "strategies": [{"kind": "random"}]})
        assert cfg.oracles[0].name == "f1"
        assert cfg.budget == 100 and cfg.repetitions == 100
        assert cfg.mcmc.iterations == 1000
        assert cfg.mcmc.burn_in == 0.2
        assert cfg.nu == 0.001

    def test_diagnostics_are_aggregated(self):
        with pytest.raises(ConfigError) as err:
            parse_config({
                "oracle": "f9",
                "strategies": [{"kind": "static", "eta": 1.5}],
                "budget": -1,
            })
        text = str(err.value)
        assert "f9" in text
        assert "eta" in text
        assert "budget" in text

    def test_missing_oracle_and_strategies(self):
        with pytest.raises(ConfigError) as err:
            parse_config({})
        assert "oracle: missing" in err.value.diagnostics
        assert "strategies: missing or empty" in err.value.diagnostics

    def test_duplicate_strategies_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config({"oracle": "f1",
                          "strategies": [{"kind": "random"},
                                         {"kind": "random"}]})

    def test_csv_oracle_entry(self):
        cfg = parse_config({
            "oracle": [{"csv": "data/alloys.csv",
                        "schema": {"numeric": ["t"], "target": "y"}}],
            "strategies": [{"kind": "random"}],
        })
        spec = cfg.oracles[0]
        assert spec.is_tabular
        assert spec.name == "alloys"
        assert spec.schema.target_column == "y"


class TestSeeds:
    def test_run_seed_independent_of_list_order(self):
        a = run_seed(3, "f2", "igs", 4)
        b = run_seed(3, "f2", "igs", 4)
        assert a.entropy == b.entropy
        assert run_seed(3, "f2", "qbc", 4).entropy != a.entropy
        assert run_seed(3, "f1", "igs", 4).entropy != a.entropy
        assert run_seed(4, "f2", "igs", 4).entropy != a.entropy

    def test_pool_seed_shared_across_strategies(self):
        assert pool_seed(3, "f6").entropy == pool_seed(3, "f6").entropy
        assert pool_seed(3, "f6").entropy != pool_seed(3, "f5").entropy


class TestValidateCommand:
    def test_good_config(self, tmp_path, capsys):
        path = write_config(tmp_path, FAST_CONFIG)
        assert validate_config(path) == []
        assert main(["validate", str(path)]) == 0
        assert "config ok" in capsys.readouterr().out

    def test_bad_config_exit_code_and_diagnostics(self, tmp_path, capsys):
        path = write_config(tmp_path, "oracle: f9\nstrategies:\n  - kind: x\n")
        assert main(["validate", str(path)]) == 2
        err = capsys.readouterr().err
        assert "f9" in err and "x" in err

    def test_missing_csv_reported(self, tmp_path):
        path = write_config(tmp_path, """\
oracle:
  - csv: /nonexistent/file.csv
    schema: {numeric: [t], target: y}
strategies:
  - kind: random
""")
        diags = validate_config(path)
        assert len(diags) == 1 and "not found" in diags[0]

    def test_unreadable_yaml(self, tmp_path):
        path = write_config(tmp_path, "strategies: [}")
        assert validate_config(path) != []
        assert main(["validate", str(path)]) == 2


class TestRunCommand:
    def test_grid_shape_and_columns(self, tmp_path):
        cfg = write_config(tmp_path, FAST_CONFIG)
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0

        rows = read_rows(out / "results.csv")
        # 2 oracles x 3 strategies x 1 repetition x budget 2
        assert len(rows) == 2 * 3 * 1 * 2
        assert tuple(rows[0].keys()) == RESULT_COLUMNS
        assert {r["oracle"] for r in rows} == {"f2", "f4"}
        assert {r["strategy"] for r in rows} == {"random", "maxvar",
                                                 "static-0.5"}
        for r in rows:
            assert float(r["rmse"]) >= 0.0
            if r["strategy"] == "static-0.5":
                assert float(r["eta_bar"]) == 0.5
            else:
                assert r["eta_bar"] == ""

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["runs_total"] == 6
        assert manifest["runs_failed"] == 0

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, FAST_CONFIG)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", str(cfg), "--out", str(out1)]) == 0
        assert main(["run", str(cfg), "--out", str(out2)]) == 0

        def stable(path):
            # Drop the timing column; everything else must match exactly.
            return [{k: v for k, v in row.items() if k != "wall_ms"}
                    for row in read_rows(path)]

        assert stable(out1 / "results.csv") == stable(out2 / "results.csv")
        assert (out1 / "summary.csv").read_bytes() == \
            (out2 / "summary.csv").read_bytes()

    def test_results_independent_of_strategy_list_order(self, tmp_path):
        reordered = FAST_CONFIG.replace(
            """strategies:
  - kind: random
  - kind: explore
    explore_kind: maxvar
  - kind: static
    eta: 0.5""",
            """strategies:
  - kind: static
    eta: 0.5
  - kind: explore
    explore_kind: maxvar
  - kind: random""")
        assert reordered != FAST_CONFIG
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["run", str(write_config(tmp_path, FAST_CONFIG, "c1.yaml")),
              "--out", str(out1)])
        main(["run", str(write_config(tmp_path, reordered, "c2.yaml")),
              "--out", str(out2)])

        def keyed(path):
            return {
                (r["oracle"], r["strategy"], r["repetition"], r["iteration"]):
                (r["rmse"], r["chosen_index"], r["chosen_point"])
                for r in read_rows(path)
            }

        assert keyed(out1 / "results.csv") == keyed(out2 / "results.csv")

    def test_invalid_config_exits_2_without_output(self, tmp_path):
        cfg = write_config(tmp_path, "oracle: f9\nstrategies: [{kind: x}]\n")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 2
        assert not out.exists()

    def test_proposed_run_writes_chain_diagnostics(self, tmp_path):
        cfg = write_config(tmp_path, """\
oracle: f2
strategies:
  - kind: proposed
budget: 1
n_initial: 3
repetitions: 2
pool: {grid_1d: 40}
gpr: {restarts: 1}
mcmc: {iterations: 30}
master_seed: 5
""")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        chain_files = sorted((out / "chains").iterdir())
        assert [p.name for p in chain_files] == ["f2__proposed__rep0.csv"]
        rows = read_rows(chain_files[0])
        assert len(rows) == 30  # budget 1 x 30 sweeps
        for r in rows[:5]:
            assert 0.0 <= float(r["eta"]) <= 1.0
            assert 0.1 <= float(r["alpha"]) <= 5.0
            assert r["accepted"] in ("0", "1")


class TestSummary:
    def test_improvement_pct(self):
        assert improvement_pct(2.0, 1.0) == pytest.approx(50.0)
        assert improvement_pct(1.0, 1.5) == pytest.approx(-50.0)

    def test_summary_matches_independent_recomputation(self, tmp_path):
        cfg = write_config(tmp_path, """\
oracle: f2
strategies:
  - kind: proposed
  - kind: explore
    explore_kind: igs
  - kind: exploit
budget: 2
n_initial: 3
repetitions: 2
pool: {grid_1d: 40}
gpr: {restarts: 1}
mcmc: {iterations: 20}
master_seed: 2
""")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0

        results = read_rows(out / "results.csv")
        summary = read_rows(out / "summary.csv")
        assert {r["strategy"] for r in summary} == {"proposed", "igs", "qbc"}

        def mean_rmse(strategy, iteration):
            vals = [float(r["rmse"]) for r in results
                    if r["strategy"] == strategy
                    and r["iteration"] == iteration]
            assert len(vals) == 2
            return np.mean(vals)

        for row in summary:
            expected = mean_rmse(row["strategy"], row["iteration"])
            assert float(row["mean_rmse"]) == pytest.approx(expected)
            assert int(row["runs"]) == 2
            if row["strategy"] == "proposed":
                for pure in ("igs", "qbc"):
                    got = float(row[f"improvement_vs_{pure}"])
                    want = improvement_pct(
                        mean_rmse(pure, row["iteration"]), expected)
                    assert got == pytest.approx(want, abs=1e-4)
            else:
                assert row["improvement_vs_igs"] == ""
                assert row["improvement_vs_qbc"] == ""
