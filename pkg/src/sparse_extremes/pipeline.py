"""Staged analysis driver: standardize, chi, cluster, epca, faces, graph, simulate.

Every stage writes plain CSV/JSON into the output directory and the run ends
with a manifest listing parameters, seeds, library versions and artifacts.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import platform
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from . import __version__
from .angular import AngularCloud, centers_to_faces, spherical_kmeans
from .coefficients import chi_curve, chi_matrix
from .epca import estimate_sigma, pca_loss
from .faces import apriori_faces, goix_faces, meyer_faces, simpson_faces
from .graphical import (
    chi_weights,
    greedy_block_search,
    fit_graph,
    model_chi_matrix,
    mst_learn,
    threshold_from_quantile,
)
from .ingest import NORMS, ObservationMatrix, extract_exceedances, k_from_quantile, rank_transform, read_csv, write_csv
from .models import (
    HuslerReissModel,
    LogisticModel,
    MaxLinearModel,
    RecursiveMLModel,
    simulate_hr_pareto,
    simulate_logistic,
    simulate_max_linear,
    simulate_recursive_ml,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
OUTPUT_ENV = "SPARSE_EXTREMES_OUTPUT_DIR"
STAGES = ("standardize", "chi", "cluster", "epca", "faces", "graph", "simulate")
FACE_METHODS = ("goix", "simpson", "meyer", "apriori")
SIM_MODELS = ("fitted", "maxlinear", "recml", "logistic", "hr")


class ConfigError(ValueError):
    pass


@dataclass
class ChiConfig:
    q_grid: list = field(default_factory=lambda: [0.8, 0.85, 0.9, 0.95, 0.98])
    n_boot: int = 0
    seed: int = 0


@dataclass
class ClusterConfig:
    p: int = 5
    cut: float = 0.02
    seed: int = 0
    restarts: int = 25


@dataclass
class EpcaConfig:
    p: int = 3
    norm: str = "l2"


@dataclass
class FacesConfig:
    method: str = "goix"
    epsilon: float = 0.1
    u: float = 0.05
    delta: float = 0.5
    criterion: str = "cond_chi"
    threshold: float = 0.5
    cap: int = 100_000


@dataclass
class GraphConfig:
    max_clique: int = 3
    censor_quantile: float = 0.95
    search: bool = True


@dataclass
class SimulationConfig:
    model: str = "fitted"
    params: Any = None  # path to a params JSON file or an inline mapping
    n: int = 1000
    seed: int = 0


_SECTIONS = {
    "chi": ChiConfig,
    "clustering": ClusterConfig,
    "epca": EpcaConfig,
    "faces": FacesConfig,
    "graph": GraphConfig,
    "simulation": SimulationConfig,
}


@dataclass
class PipelineConfig:
    input: str | None = None
    norm: str = "l1"
    k: int | None = None
    quantile: float | None = 0.95
    stages: list = field(default_factory=lambda: list(STAGES))
    output_dir: str = "out"
    chi: ChiConfig = field(default_factory=ChiConfig)
    clustering: ClusterConfig = field(default_factory=ClusterConfig)
    epca: EpcaConfig = field(default_factory=EpcaConfig)
    faces: FacesConfig = field(default_factory=FacesConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)

    def validate(self) -> "PipelineConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.norm in NORMS, f"norm must be one of {NORMS}")
        need(self.k is not None or self.quantile is not None, "set k or quantile")
        if self.k is not None:
            need(int(self.k) >= 1, "k must be positive")
        if self.quantile is not None:
            need(0.0 < self.quantile < 1.0, "quantile must lie in (0, 1)")
        need(all(s in STAGES for s in self.stages), f"stages must be drawn from {STAGES}")
        need(all(0.0 < q < 1.0 for q in self.chi.q_grid), "chi.q_grid must lie in (0, 1)")
        need(list(self.chi.q_grid) == sorted(set(self.chi.q_grid)), "chi.q_grid must be strictly increasing")
        need(self.chi.n_boot >= 0, "chi.n_boot must be nonnegative")
        need(self.clustering.p >= 1, "clustering.p must be positive")
        need(0.0 < self.clustering.cut < 1.0, "clustering.cut must lie in (0, 1)")
        need(self.clustering.restarts >= 1, "clustering.restarts must be positive")
        need(self.epca.p >= 1, "epca.p must be positive")
        need(self.epca.norm in NORMS, f"epca.norm must be one of {NORMS}")
        need(self.faces.method in FACE_METHODS, f"faces.method must be one of {FACE_METHODS}")
        need(0.0 < self.faces.epsilon < 1.0, "faces.epsilon must lie in (0, 1)")
        need(self.faces.u > 0.0, "faces.u must be positive")
        need(0.0 <= self.faces.delta < 1.0, "faces.delta must lie in [0, 1)")
        need(self.faces.criterion in ("cond_chi", "eta_test"), "faces.criterion must be cond_chi or eta_test")
        need(self.faces.cap >= 1, "faces.cap must be positive")
        need(self.graph.max_clique in (2, 3), "graph.max_clique must be 2 or 3")
        need(0.0 < self.graph.censor_quantile < 1.0, "graph.censor_quantile must lie in (0, 1)")
        need(self.simulation.model in SIM_MODELS, f"simulation.model must be one of {SIM_MODELS}")
        need(self.simulation.n >= 1, "simulation.n must be positive")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        unknown = set(doc) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for key, value in doc.items():
            if key in _SECTIONS:
                sec = _SECTIONS[key]
                bad = set(value) - {f.name for f in dataclasses.fields(sec)}
                if bad:
                    raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
                kw[key] = sec(**value)
            else:
                kw[key] = value
        return cls(**kw).validate()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_json(Path(path).read_text())


def merge_config(base: PipelineConfig, override: dict) -> PipelineConfig:
    """Apply a (possibly partial) config mapping on top of ``base``."""
    doc = base.to_dict()
    for key, value in override.items():
        if key in _SECTIONS and isinstance(value, dict):
            doc[key].update(value)
        else:
            doc[key] = value
    return PipelineConfig.from_dict(doc)


# ------------------------------------------------------------------ io helpers


def _write_matrix(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not serializable: {type(o)}")


class _Output:
    """Output directory that remembers which files were written."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.written: list[str] = []

    def path(self, name: str) -> Path:
        self.written.append(name)
        return self.root / name

    def csv(self, name: str, header, rows) -> None:
        _write_matrix(self.path(name), header, rows)

    def json(self, name: str, obj) -> None:
        _dump(self.path(name), obj)

    def text(self, name: str, text: str) -> None:
        self.path(name).write_text(text)


# --------------------------------------------------------------- simulation


def model_from_params(kind: str, params: dict):
    """Build a model from its params JSON.

    maxlinear: {"A": [[...], ...]} (rows are rescaled to sum to one)
    recml:     {"d": 3, "edges": [[parent, child, beta], ...], "diag": [b_11, ...]}
    logistic:  {"d": 3, "theta": 0.5}
    hr:        {"gamma": [[...], ...]}
    """
    if kind == "maxlinear":
        return MaxLinearModel.from_unnormalized(np.asarray(params["A"], float))
    if kind == "recml":
        edges = {(int(p), int(c)): float(b) for p, c, b in params["edges"]}
        diag = params.get("diag")
        return RecursiveMLModel(int(params["d"]), edges, None if diag is None else np.asarray(diag, float))
    if kind == "logistic":
        return LogisticModel(int(params["d"]), float(params["theta"]))
    if kind == "hr":
        return HuslerReissModel(np.asarray(params["gamma"], float))
    raise ConfigError(f"unknown model {kind!r}")


def simulate(kind: str, params: dict, n: int, seed: int, labels=None) -> np.ndarray:
    model = model_from_params(kind, params)
    if kind == "maxlinear":
        return simulate_max_linear(model, n, seed, labels).values
    if kind == "recml":
        return simulate_recursive_ml(model, n, seed, labels).values
    if kind == "logistic":
        return simulate_logistic(model, n, seed, labels).values
    return simulate_hr_pareto(model, n, seed)


def _load_params(spec) -> dict:
    if spec is None:
        raise ConfigError("simulation.params is required for this model")
    if isinstance(spec, dict):
        return spec
    return json.loads(Path(spec).read_text())


# ---------------------------------------------------------------- pipeline


@dataclass
class PipelineReport:
    output_dir: Path
    manifest: dict
    results: dict
    exit_code: int


def _k_for(config: PipelineConfig, n: int) -> int:
    if config.k is not None:
        return int(config.k)
    return k_from_quantile(n, config.quantile)


def _stage_standardize(cfg, state, out):
    data = state["data"]
    sample = rank_transform(data)
    k = _k_for(cfg, sample.n)
    exc = extract_exceedances(sample, cfg.norm, k)
    state.update(sample=sample, k=k, exceedances=exc)
    out.csv("pareto.csv", list(sample.labels), sample.pareto)
    out.text("exceedances.json", exc.to_json())
    return {"n": sample.n, "d": sample.d, "k": k, "threshold": exc.threshold}


def _stage_chi(cfg, state, out):
    sample = state["sample"]
    level = 1.0 - state["k"] / sample.n
    chi = chi_matrix(sample, level)
    state["chi"] = chi
    labels = list(sample.labels)
    out.csv("chi_matrix.csv", ["label"] + labels, ([labels[i]] + list(chi[i]) for i in range(len(labels))))
    curves = []
    for i in range(sample.d):
        for j in range(i + 1, sample.d):
            for est in chi_curve(sample, i, j, cfg.chi.q_grid, cfg.chi.n_boot, cfg.chi.seed):
                curves.append((i, j, est.level, est.value, est.ci_lower, est.ci_upper))
    state["chi_curves"] = curves
    return {"level": level, "pairs": sample.d * (sample.d - 1) // 2}


def _stage_cluster(cfg, state, out):
    cloud = AngularCloud.from_exceedances(state["exceedances"])
    c = cfg.clustering
    res = spherical_kmeans(cloud, c.p, seed=c.seed, restarts=c.restarts)
    faces = centers_to_faces(res, c.cut)
    labels = list(state["sample"].labels)
    out.csv("centers.csv", ["cluster"] + labels, ([j] + list(res.centers[j]) for j in range(res.p)))
    doc = faces.to_dict()
    for f in doc["faces"]:
        f["weight"] = f["mass"]
    out.json("cluster_faces.json", doc)
    counts = res.counts()
    return {"cost": res.cost, "iterations": res.iterations, "counts": counts.tolist(), "n_faces": len(faces)}


def _stage_epca(cfg, state, out):
    sample = state["sample"]
    exc = extract_exceedances(sample, cfg.epca.norm, state["k"])
    pca = estimate_sigma(AngularCloud.from_exceedances(exc))
    state["pca"] = pca
    labels = list(sample.labels)
    d = pca.d
    out.csv("eigenvalues.csv", ["component", "eigenvalue"], ((c + 1, pca.eigenvalues[c]) for c in range(d)))
    out.csv("eigenvectors.csv", ["label"] + [f"v{c + 1}" for c in range(d)],
                  ([labels[i]] + list(pca.eigenvectors[i]) for i in range(d)))
    losses = [pca_loss(pca, p) for p in range(1, d + 1)]
    return {"p": cfg.epca.p, "loss_at_p": losses[min(cfg.epca.p, d) - 1], "explained_at_p": float(pca.explained()[min(cfg.epca.p, d) - 1])}


def _stage_faces(cfg, state, out):
    f = cfg.faces
    sample, k = state["sample"], state["k"]
    if f.method == "goix":
        fs = goix_faces(extract_exceedances(sample, "linf", k), f.epsilon, f.u)
    elif f.method == "meyer":
        fs = meyer_faces(extract_exceedances(sample, "l1", k), f.u)
    elif f.method == "simpson":
        fs = simpson_faces(sample, f.delta, k, f.u)
    else:
        fs = apriori_faces(sample, k, f.criterion, f.threshold, f.cap)
    doc = fs.to_dict()
    out.json("faces.json", doc)
    state["faces"] = fs
    return {"method": f.method, "n_faces": len(fs), "maximal": doc["maximal"]}


def _stage_graph(cfg, state, out):
    sample = state["sample"]
    t = threshold_from_quantile(cfg.graph.censor_quantile)
    q = cfg.graph.censor_quantile
    chi = chi_matrix(sample, q)
    tree = mst_learn(chi_weights(chi))
    out.json("tree.json", tree.to_dict())
    if cfg.graph.search:
        res = greedy_block_search(sample, t, cfg.graph.max_clique, start=tree)
        path, best = res.path, res.best
    else:
        best = fit_graph(sample, tree, t)
        path = (best,)
    out.json("fitted_model.json", best.to_dict())
    prev = None
    rows = []
    for step, m in enumerate(path):
        added = "" if prev is None else ";".join(f"{a}-{b}" for a, b in sorted(m.graph.edges - prev.graph.edges))
        rows.append((step, added, len(m.graph.edges), m.n_params, m.loglik, m.aic))
        prev = m
    out.csv("aic_path.csv", ["step", "added_edge", "n_edges", "n_params", "loglik", "aic"], rows)
    state["fitted"] = best
    state["chi_censor"] = chi
    return {"threshold": t, "edges": [list(e) for e in best.graph.sorted_edges()], "aic": best.aic, "steps": len(path)}


def _stage_simulate(cfg, state, out):
    s = cfg.simulation
    labels = list(state["sample"].labels) if "sample" in state else None
    if s.model == "fitted":
        if "fitted" not in state:
            raise RuntimeError("simulation.model 'fitted' needs the graph stage")
        values = simulate_hr_pareto(HuslerReissModel(state["fitted"].gamma), s.n, s.seed)
    else:
        values = simulate(s.model, _load_params(s.params), s.n, s.seed)
    d = values.shape[1]
    labels = labels if labels and len(labels) == d else [f"X{i + 1}" for i in range(d)]
    write_csv(out.path("simulated.csv"), ObservationMatrix(values, tuple(labels)))
    return {"model": s.model, "n": s.n, "seed": s.seed}


_RUNNERS = {
    "standardize": _stage_standardize,
    "chi": _stage_chi,
    "cluster": _stage_cluster,
    "epca": _stage_epca,
    "faces": _stage_faces,
    "graph": _stage_graph,
    "simulate": _stage_simulate,
}


def emit_plot_data(state: dict, out) -> dict:
    """Plot-ready CSVs for whatever stages produced output; missing ones are noted."""
    out = out if isinstance(out, _Output) else _Output(out)
    notes = {}
    written = []
    if "chi_curves" in state:
        out.csv("plot_chi_curves.csv", ["i", "j", "q", "value", "lo", "hi"], state["chi_curves"])
        written.append("plot_chi_curves.csv")
    else:
        notes["chi_curves"] = "skipped: chi stage did not run"
    if "pca" in state:
        pca = state["pca"]
        total = float(np.trace(pca.sigma))
        cum = pca.explained()
        out.csv("plot_scree.csv", ["component", "eigenvalue", "explained", "cumulative"],
                      ((c + 1, pca.eigenvalues[c], pca.eigenvalues[c] / total, cum[c]) for c in range(pca.d)))
        labels = list(state["sample"].labels)
        out.csv("plot_eigenvectors_by_label.csv", ["label"] + [f"v{c + 1}" for c in range(pca.d)],
                      ([labels[i]] + list(pca.eigenvectors[i]) for i in range(pca.d)))
        written += ["plot_scree.csv", "plot_eigenvectors_by_label.csv"]
    else:
        notes["scree"] = "skipped: epca stage did not run"
    if "fitted" in state:
        mchi = model_chi_matrix(state["fitted"])
        emp = state["chi_censor"]
        labels = list(state["sample"].labels)
        d = mchi.shape[0]
        rows = [(i, j, labels[i], labels[j], emp[i, j], mchi[i, j]) for i in range(d) for j in range(i + 1, d)]
        out.csv("plot_chi_scatter.csv", ["i", "j", "label_i", "label_j", "empirical", "model"], rows)
        written.append("plot_chi_scatter.csv")
    else:
        notes["chi_scatter"] = "skipped: graph stage did not run"
    return {"written": written, "notes": notes}


def _resolve_output(config: PipelineConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or config.output_dir)


def run_pipeline(config: PipelineConfig, data: ObservationMatrix | None = None) -> PipelineReport:
    """Run the configured stages in order and write a manifest."""
    config.validate()
    root = _resolve_output(config)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "config": config.to_dict(),
        "stages": [],
        "status": "ok",
    }
    state: dict = {}
    exit_code = 0
    stages = [s for s in STAGES if s in config.stages]
    needs_data = any(s != "simulate" for s in stages) or config.simulation.model == "fitted"
    try:
        if needs_data:
            if data is None:
                if config.input is None:
                    raise ConfigError("no input data given")
                data = read_csv(config.input)
            state["data"] = data
            if "standardize" not in stages:
                stages.insert(0, "standardize")
    except Exception as exc:  # noqa: BLE001 - recorded in the manifest
        manifest.update(status="failed", failed_stage="input", diagnostic=f"{type(exc).__name__}: {exc}")
        _Output(root).json("manifest.json", manifest)
        return PipelineReport(root, manifest, state, 1)
    for stage in stages:
        out = _Output(root)
        try:
            summary = _RUNNERS[stage](config, state, out)
        except Exception as exc:  # noqa: BLE001
            log.error("stage %s failed: %s", stage, exc)
            manifest["stages"].append({"stage": stage, "status": "failed"})
            manifest.update(status="failed", failed_stage=stage, diagnostic=f"{type(exc).__name__}: {exc}",
                            traceback=traceback.format_exc(limit=3))
            exit_code = 1
            break
        manifest["stages"].append({"stage": stage, "status": "ok", "summary": summary, "artifacts": out.written})
    manifest["plot_data"] = emit_plot_data(state, root)
    manifest["seeds"] = {"chi": config.chi.seed, "clustering": config.clustering.seed, "simulation": config.simulation.seed}
    _Output(root).json("manifest.json", manifest)
    return PipelineReport(root, manifest, state, exit_code)
