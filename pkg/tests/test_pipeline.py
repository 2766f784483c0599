import csv
import json
from collections import Counter

import pytest

from inflowkit import cli, corpus, pipeline
from inflowkit.errors import InvalidConfig
from inflowkit.pipeline import RunConfig


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# validate


def test_validate_bundled_corpus():
    diag, code = pipeline.cmd_validate(pipeline.default_corpus_dir())
    assert code == 0 and diag["errors"] == []
    assert set(diag["counts"]) == {"commits", "trouble_reports", "features", "releases"}
    bundle = corpus.load_corpus_dir(pipeline.default_corpus_dir())
    assert diag["counts"]["commits"] == len(bundle.commits)
    assert diag["counts"]["trouble_reports"] == len(bundle.trouble_reports)
    rare = sorted(s for s, n in Counter(c.subsystem for c in bundle.commits).items() if n < 13)
    assert diag["consolidated_subsystems"] == rare


def test_validate_dangling_tr(tmp_path):
    pipeline.cmd_synth(RunConfig(), tmp_path)
    path = tmp_path / "trouble_reports.csv"
    lines = path.read_text(encoding="utf-8").splitlines()
    head, first = lines[0].split(","), lines[1].split(",")
    first[head.index("release_id")] = "R999"
    lines[1] = ",".join(first)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    diag, code = pipeline.cmd_validate(tmp_path)
    assert code == 1
    assert diag["errors"][0]["kind"] == "DanglingReference"
    assert first[head.index("tr_id")] in diag["errors"][0]["message"]


def test_validate_missing_dir(tmp_path):
    _, code = pipeline.cmd_validate(tmp_path / "nope")
    assert code == 1


# CLI


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.run(["validate"]) == 0
    assert cli.run(["validate", "--corpus-dir", str(tmp_path)]) == 1
    assert cli.run(["test1", "--split-fraction", "1.5"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"lagg": 3}', encoding="utf-8")
    assert cli.run(["test1", "--config", str(bad)]) == 2
    capsys.readouterr()


def test_cli_synth_then_validate(tmp_path, capsys):
    out = tmp_path / "corpus"
    assert cli.run(["synth", "--out-dir", str(out), "--seed", "5"]) == 0
    assert (out / "ground_truth.json").exists()
    capsys.readouterr()
    assert cli.run(["validate", "--corpus-dir", str(out)]) == 0
    diag = json.loads(capsys.readouterr().out)
    assert diag["errors"] == [] and diag["counts"]["features"] == 2000


def test_config_file_overrides_flags(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"lag": 3, "lasso": {"gamma": 0.5}}), encoding="utf-8")
    args = cli.build_parser().parse_args(["test1", "--lag", "2", "--seed", "9", "--config", str(f)])
    cfg = cli.config_from_args(args)
    assert cfg.lag == 3 and cfg.seed == 9 and cfg.synth.seed == 9
    assert cfg.lasso.gamma == 0.5


# config


def test_run_config_roundtrip_and_unknown():
    cfg = RunConfig()
    assert RunConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
    with pytest.raises(InvalidConfig):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(InvalidConfig):
        RunConfig.from_dict({"scalers": ["zscore"]})
    assert cfg.lag == 4 and cfg.selection.max_clusters == 30


# test1 / test3


@pytest.fixture(scope="module")
def test1_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("t1")
    return d, pipeline.cmd_test1(RunConfig(out_dir=str(d)))


def test_table4_schema(test1_run):
    d, _ = test1_run
    rows = _rows(d / "tables" / "table4_test1_performance.csv")
    assert rows[0] == ["score", "slice", "random_forest_classifier", "random_forest_regressor", "lasso", "svc"]
    assert [r[:2] for r in rows[1:4]] == [["MAE", "Full set"], ["MAE", "Test set"], ["MAE", "Train set"]]
    assert {r[0] for r in rows[1:]} == {"MAE", "R2", "MSE", "f1"}
    for name in ("table5_forest_classifier_top5.csv", "table6_forest_regressor_top5.csv"):
        assert len(_rows(d / "tables" / name)) == 6


def test_test1_targets_scaled_on_train(test1_run):
    _, rep = test1_run
    t1 = rep["test1"]
    cut = t1["dataset"]["train_rows"]
    y = t1["series"]["actual_scaled"]
    assert min(y[:cut]) == 0.0 and max(y[:cut]) == 1.0
    assert t1["dataset"]["rows"] == cut + t1["dataset"]["test_rows"]
    assert t1["dataset"]["test_rows"] == -(-t1["dataset"]["rows"] * 2 // 10)


def test_test1_rerun_byte_identical(test1_run, tmp_path):
    d, _ = test1_run
    pipeline.cmd_test1(RunConfig(out_dir=str(tmp_path)))
    for name in ("report.json", "tables/table4_test1_performance.csv", "charts/test1_actual_vs_predicted.svg"):
        assert (tmp_path / name).read_bytes() == (d / name).read_bytes()


def test_test3_without_clusters_equals_test1(test1_run, tmp_path):
    _, rep1 = test1_run
    rep3 = pipeline.cmd_test3(RunConfig(out_dir=str(tmp_path)), {})
    assert rep3["test3"]["cluster_ids"] == [] and rep3["test3"]["ablation"] == []
    assert rep3["test3"]["performance"]["total"] == rep1["test1"]["performance"]
    assert rep3["test3"]["dataset"]["columns"] == rep1["test1"]["dataset"]["columns"]


# full run artifacts (shared with the acceptance suite)


def test_grid_files(all_runs):
    d = all_runs[1]["dir"]
    grids = sorted((d / "tables" / "grids").glob("dbscan_*.csv"))
    assert len(grids) == len(pipeline.LEVELS) * len(pipeline.MEASURES) * len(RunConfig().scalers)
    for g in grids:
        assert len(_rows(g)) == 241


def test_selected_model_within_cap(all_runs):
    sel = all_runs[1]["report"]["test2"]["selected"]
    assert 2 <= sel["clusters"] <= 30
    assert sel["silhouette"] is not None


def test_importance_tables(all_runs):
    d = all_runs[1]["dir"] / "tables"
    for name in ("table11_importance_total.csv", "table12_importance_class_2.csv", "table13_importance_class_4.csv"):
        rows = _rows(d / name)
        methods = {r[0] for r in rows[1:]}
        assert methods == {"Correlation", "LASSO", "Random Forest"}
        assert len(rows[0]) == 2 + pipeline.TOP_IMPORTANCE
