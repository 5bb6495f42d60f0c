import csv
import json

import numpy as np
import pytest

from hawkfenn.cli import main
from hawkfenn.pipeline.hpo import SearchSpace
from hawkfenn.pipeline.training import TrainingHyperparameters
from hawkfenn.stats import summarize

TINY = ["--pop", "6", "--iters", "8", "--dims", "3"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _bench(out, *extra):
    return main(["bench", "--out", str(out), *TINY, *extra])


def test_single_cell_grid_writes_one_trace(tmp_path):
    assert _bench(tmp_path, "--functions", "sphere", "--algorithms", "hho", "--seeds", "0", "--no-plot") == 0
    assert len(list((tmp_path / "traces").glob("*.csv"))) == 1
    assert (tmp_path / "manifest.json").exists()


def test_bench_is_deterministic_and_replayable(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    args = ("--functions", "sphere,ackley", "--algorithms", "hho_plus,hho", "--seeds", "0-2")
    assert _bench(a, *args) == 0 and _bench(b, *args) == 0
    assert main(["bench", "--config", str(a / "manifest.json"), "--out", str(c)]) == 0
    for other in (b, c):
        for rel in ["summary.csv", "manifest.json", "plots/sphere__d3.svg"] + [
                f"traces/{p.name}" for p in (a / "traces").glob("*.csv")]:
            assert (a / rel).read_bytes() == (other / rel).read_bytes(), rel
        for p in (a / "runs").glob("*.json"):
            x, y = json.loads(p.read_text()), json.loads((other / "runs" / p.name).read_text())
            x.pop("wall_time"), y.pop("wall_time")
            assert x == y


def test_summary_matches_stats_recomputed_from_traces(tmp_path):
    _bench(tmp_path, "--functions", "rastrigin", "--algorithms", "hho,random_search", "--seeds", "0-3", "--no-plot")
    for row in _rows(tmp_path / "summary.csv"):
        finals = [float(_rows(p)[-1]["best_fitness"])
                  for p in sorted((tmp_path / "traces").glob(f"{row['algorithm']}__{row['function']}__*.csv"))]
        s = summarize(finals)
        assert int(row["runs"]) == 4
        assert float(row["mean"]) == s.mean and float(row["std"]) == s.std


@pytest.mark.parametrize("flag", [["--functions", "nope"], ["--algorithms", "nope"], ["--acceptance", "nope"]])
def test_unknown_ids_exit_2(tmp_path, flag, capsys):
    assert _bench(tmp_path, *flag) == 2
    assert "unknown" in capsys.readouterr().err


def test_argparse_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--pop", "many"])
    assert exc.value.code == 2


def test_compare_against_itself_is_all_equal(tmp_path):
    _bench(tmp_path / "r", "--functions", "sphere,griewank", "--algorithms", "hho", "--seeds", "0-4", "--no-plot")
    assert main(["compare", str(tmp_path / "r"), str(tmp_path / "r"), "--out", str(tmp_path / "c")]) == 0
    rows = _rows(tmp_path / "c" / "comparison.csv")
    assert rows and all(r["winner"] == "=" for r in rows)
    assert all(r["p_value"] == "NaN" or float(r["p_value"]) >= 0.99 for r in rows)


def test_compare_beats_crippled_random_search(tmp_path):
    _bench(tmp_path / "good", "--functions", "sphere", "--algorithms", "hho_plus", "--seeds", "0-9", "--no-plot")
    main(["bench", "--out", str(tmp_path / "bad"), "--pop", "2", "--iters", "2", "--dims", "3",
          "--functions", "sphere", "--algorithms", "random_search", "--seeds", "0-9", "--no-plot"])
    assert main(["compare", str(tmp_path / "good"), str(tmp_path / "bad"), "--out", str(tmp_path / "c")]) == 0
    (row,) = _rows(tmp_path / "c" / "comparison.csv")
    assert row["algorithm"] == "random_search" and row["winner"] == "+"
    report = (tmp_path / "c" / "report.txt").read_text()
    assert "# hho_plus vs random_search: +1 =0 -0" in report
    assert "not computed" in report and not (tmp_path / "c" / "friedman.csv").exists()


def test_compare_friedman_table_is_consistent(tmp_path):
    _bench(tmp_path / "r", "--functions", "sphere,ackley,griewank", "--algorithms", "hho_plus,hho,random_search",
           "--seeds", "0-3", "--no-plot")
    assert main(["compare", str(tmp_path / "r"), "--out", str(tmp_path / "c")]) == 0
    ranks = _rows(tmp_path / "c" / "friedman.csv")
    assert [int(r["position"]) for r in ranks] == [1, 2, 3]
    assert [float(r["mean_rank"]) for r in ranks] == sorted(float(r["mean_rank"]) for r in ranks)
    # mean ranks over k algorithms always sum to k(k+1)/2
    assert sum(float(r["mean_rank"]) for r in ranks) == pytest.approx(6.0)
    assert len(_rows(tmp_path / "c" / "comparison.csv")) == 6


def test_compare_mismatched_functions_is_usage_error(tmp_path):
    _bench(tmp_path / "a", "--functions", "sphere", "--algorithms", "hho", "--seeds", "0-1", "--no-plot")
    _bench(tmp_path / "b", "--functions", "ackley", "--algorithms", "gwo_baseline", "--seeds", "0-1", "--no-plot")
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(tmp_path / "c")]) == 2


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["gen-data", "--subjects", "6", "--segments", "30", "--seed", "1", "--out", str(out)]) == 0
    return out


def test_train_heads_give_comparable_metric_files(dataset_dir, tmp_path):
    for head in ("mlp", "fenn"):
        assert main(["train", "--data", str(dataset_dir), "--head", head, "--folds", "3",
                     "--train-iters", "30", "--out", str(tmp_path)]) == 0
    mlp, fenn = _rows(tmp_path / "summary_mlp.csv"), _rows(tmp_path / "summary_fenn.csv")
    assert [r["metric"] for r in mlp] == [r["metric"] for r in fenn] == ["accuracy", "sensitivity", "specificity"]
    assert len(_rows(tmp_path / "folds_fenn.csv")) == 3


def test_train_subject_integrity_and_replay(dataset_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--data", str(dataset_dir), "--folds", "3", "--train-iters", "20",
                 "--subject-integrity", "--head", "enn", "--out", str(a)]) == 0
    assert main(["train", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    for name in ("folds_enn.csv", "summary_enn.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_gen_data_replay(dataset_dir, tmp_path):
    assert main(["gen-data", "--config", str(dataset_dir / "manifest.json"), "--out", str(tmp_path)]) == 0
    for p in dataset_dir.iterdir():
        assert p.read_bytes() == (tmp_path / p.name).read_bytes(), p.name


def test_hpo_output_parses_into_space_and_feeds_train(dataset_dir, tmp_path):
    out = tmp_path / "hpo"
    assert main(["hpo", "--data", str(dataset_dir), "--pop", "2", "--iters", "1", "--repeats", "1",
                 "--train-iters", "6", "--drop-period", "3", "--hidden", "4", "--out", str(out)]) == 0
    doc = json.loads((out / "best.json").read_text())
    hyper = TrainingHyperparameters.from_json(doc["best"])
    assert SearchSpace().contains(hyper)
    assert np.all(np.diff(doc["best_trace"]) <= 0)
    assert (out / "trace.svg").exists() and _rows(out / "trace.csv")
    assert main(["hpo", "--config", str(out / "manifest.json"), "--out", str(tmp_path / "again")]) == 0
    for name in ("best.json", "trace.csv", "trace.svg"):
        assert (out / name).read_bytes() == (tmp_path / "again" / name).read_bytes()
    assert main(["train", "--data", str(dataset_dir), "--hyper", str(out / "best.json"), "--folds", "2",
                 "--train-iters", "5", "--hidden", "4", "--out", str(tmp_path / "t")]) == 0
    used = json.loads((tmp_path / "t" / "manifest.json").read_text())["hyperparameters"]
    assert used["ilr"] == hyper.ilr and used["dp"] == hyper.dp


def test_runtime_and_usage_failures(tmp_path):
    assert main(["train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 2
    assert main(["hpo", "--data", str(tmp_path), "--algorithm", "nope", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "cfg.json"
    bad.write_text(json.dumps({"not_a_flag": 1}))
    assert main(["bench", "--config", str(bad), "--out", str(tmp_path)]) == 2
