import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sparse_extremes import MaxLinearModel, ObservationMatrix, simulate_max_linear_limit, write_csv
from sparse_extremes.cli import main
from sparse_extremes.pipeline import OUTPUT_ENV, ConfigError, PipelineConfig, merge_config, run_pipeline


def planted(n=4000, seed=0):
    # two blocks plus weak idiosyncratic factors, so no pair is exactly comonotone
    A = np.zeros((5, 7))
    A[:2, 0] = 0.95
    A[2:, 1] = 0.95
    A[:, 2:] = 0.05 * np.eye(5)
    return simulate_max_linear_limit(MaxLinearModel(A), n, seed=seed, labels=["a", "b", "c", "d", "e"])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def data_csv(tmp_path):
    path = tmp_path / "input.csv"
    write_csv(path, planted())
    return path


def quick(tmp_path, **over):
    base = {"output_dir": str(tmp_path / "out"), "k": 100, "quantile": None,
            "chi": {"n_boot": 20}, "clustering": {"p": 2, "restarts": 3},
            "graph": {"censor_quantile": 0.95}}
    for key, value in over.items():
        if isinstance(value, dict) and key in base:
            base[key].update(value)
        else:
            base[key] = value
    return merge_config(PipelineConfig(), base)


def test_config_round_trip_and_validation():
    cfg = PipelineConfig(k=50, quantile=None)
    assert PipelineConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ConfigError, match="unknown"):
        PipelineConfig.from_dict({"nrom": "l1"})
    with pytest.raises(ConfigError, match="unknown keys in faces"):
        merge_config(cfg, {"faces": {"eps": 0.1}})
    for bad in ({"norm": "l3"}, {"faces": {"epsilon": 1.5}}, {"graph": {"max_clique": 4}},
                {"chi": {"q_grid": [0.9, 0.8]}}, {"quantile": 1.0}):
        with pytest.raises(ConfigError):
            merge_config(cfg, bad)


def test_full_pipeline_artifacts(tmp_path):
    cfg = quick(tmp_path, faces={"method": "goix"}, simulation={"n": 200})
    rep = run_pipeline(cfg, planted())
    assert rep.exit_code == 0, rep.manifest.get("diagnostic")
    out = rep.output_dir
    manifest = json.loads((out / "manifest.json").read_text())
    assert [s["stage"] for s in manifest["stages"]] == ["standardize", "chi", "cluster", "epca", "faces", "graph", "simulate"]
    assert manifest["config"]["faces"]["epsilon"] == 0.1 and manifest["seeds"]["simulation"] == 0

    faces = json.loads((out / "faces.json").read_text())
    assert faces["maximal"] == [[0, 1], [2, 3, 4]]

    clusters = json.loads((out / "cluster_faces.json").read_text())
    assert sum(f["count"] for f in clusters["faces"]) == 100

    curves = read_rows(out / "plot_chi_curves.csv")
    assert curves[0] == ["i", "j", "q", "value", "lo", "hi"]
    assert len(read_rows(out / "plot_scree.csv")) - 1 == 5
    assert len(read_rows(out / "plot_chi_scatter.csv")) - 1 == 10
    labels = [r[0] for r in read_rows(out / "plot_eigenvectors_by_label.csv")[1:]]
    assert labels == ["a", "b", "c", "d", "e"]

    path = read_rows(out / "aic_path.csv")
    assert path[0] == ["step", "added_edge", "n_edges", "n_params", "loglik", "aic"]
    assert [int(r[0]) for r in path[1:]] == list(range(len(path) - 1))
    assert len(read_rows(out / "simulated.csv")) == 201


def test_runs_are_bit_identical(tmp_path):
    reps = []
    for name in ("one", "two"):
        cfg = quick(tmp_path, output_dir=str(tmp_path / name), stages=["chi", "cluster", "epca", "faces"])
        reps.append(run_pipeline(cfg, planted()))
    a, b = (r.output_dir for r in reps)
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        if name == "manifest.json":
            ma, mb = (json.loads((d / name).read_text()) for d in (a, b))
            ma["config"].pop("output_dir"), mb["config"].pop("output_dir")
            assert ma == mb
        else:
            assert (a / name).read_bytes() == (b / name).read_bytes()


def test_failure_is_recorded(tmp_path):
    cfg = quick(tmp_path, stages=["cluster"], clustering={"p": 500})
    rep = run_pipeline(cfg, planted())
    assert rep.exit_code == 1
    man = json.loads((rep.output_dir / "manifest.json").read_text())
    assert man["status"] == "failed" and man["failed_stage"] == "cluster"
    assert "p=500" in man["diagnostic"]
    assert "scree" in man["plot_data"]["notes"]


def test_missing_input_is_recorded(tmp_path):
    rep = run_pipeline(quick(tmp_path, input=str(tmp_path / "nope.csv")))
    assert rep.exit_code == 1 and rep.manifest["failed_stage"] == "input"


def test_environment_overrides_output(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    rep = run_pipeline(quick(tmp_path, stages=["standardize"]), planted())
    assert rep.output_dir == tmp_path / "env"
    assert (tmp_path / "env" / "pareto.csv").exists()


def test_cli_subcommands(tmp_path, data_csv, capsys):
    out = tmp_path / "cli"
    assert main(["standardize", "--input", str(data_csv), "--output-dir", str(out), "--k", "100"]) == 0
    exc = json.loads((out / "exceedances.json").read_text())
    assert exc["k"] == 100 and exc["norm"] == "l1"
    assert "ok: wrote" in capsys.readouterr().out

    assert main(["faces", "--input", str(data_csv), "--output-dir", str(out), "--k", "100",
                 "--method", "meyer", "--u", "0.05"]) == 0
    doc = json.loads((out / "faces.json").read_text())
    assert doc["method"] == "meyer" and doc["params"]["u"] == 0.05

    assert main(["epca", "--input", str(data_csv), "--output-dir", str(out), "--quantile", "0.95", "--p", "2"]) == 0
    assert len(read_rows(out / "eigenvalues.csv")) == 6


def test_cli_config_file_wins_over_flags(tmp_path, data_csv):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"faces": {"method": "apriori", "threshold": 0.3}}))
    out = tmp_path / "cfg"
    assert main(["faces", "--input", str(data_csv), "--output-dir", str(out), "--k", "100",
                 "--method", "goix", "--config", str(conf)]) == 0
    assert json.loads((out / "faces.json").read_text())["method"] == "apriori"


def test_cli_simulate_from_params(tmp_path):
    params = tmp_path / "hr.json"
    params.write_text(json.dumps({"gamma": [[0, 1, 2], [1, 0, 1], [2, 1, 0]]}))
    out = tmp_path / "sim"
    assert main(["simulate", "--model", "hr", "--params", str(params), "--n", "50", "--seed", "3",
                 "--output-dir", str(out)]) == 0
    rows = read_rows(out / "simulated.csv")
    assert len(rows) == 51
    assert all(max(float(v) for v in r) >= 1 for r in rows[1:])


def test_cli_errors(tmp_path, capsys):
    assert main(["chi", "--output-dir", str(tmp_path), "--q-grid", "0.9,0.8", "--input", "x.csv"]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert main(["chi", "--output-dir", str(tmp_path / "e"), "--input", str(tmp_path / "missing.csv")]) == 1


def test_module_entry_point(tmp_path, data_csv):
    proc = subprocess.run(
        [sys.executable, "-m", "sparse_extremes.cli", "learn-tree", "--input", str(data_csv),
         "--output-dir", str(tmp_path / "m"), "--k", "100", "--censor-quantile", "0.95"],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    tree = json.loads((tmp_path / "m" / "tree.json").read_text())
    assert tree["kind"] == "tree" and len(tree["edges"]) == 4
