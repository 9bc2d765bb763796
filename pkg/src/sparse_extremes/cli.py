"""Command-line entry point.

Each subcommand runs the pipeline restricted to one stage, so its flags are the
matching PipelineConfig fields.  ``--config file.json`` is applied on top of
the flags, and the SPARSE_EXTREMES_OUTPUT_DIR environment variable overrides
the output directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .pipeline import OUTPUT_ENV, ConfigError, PipelineConfig, merge_config, run_pipeline

STAGE_OF = {
    "standardize": ["standardize"],
    "chi": ["chi"],
    "cluster": ["cluster"],
    "epca": ["epca"],
    "faces": ["faces"],
    "learn-tree": ["graph"],
    "fit-graph": ["graph"],
    "simulate": ["simulate"],
    "pipeline": None,
}


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--config", help="JSON config applied on top of the flags")
    p.add_argument("--output-dir", help=f"output directory (env {OUTPUT_ENV} wins)")
    if data:
        p.add_argument("--input", help="CSV with a header row of labels")
        p.add_argument("--norm", choices=["l1", "l2", "linf"])
        g = p.add_mutually_exclusive_group()
        g.add_argument("--k", type=int, help="number of exceedances")
        g.add_argument("--quantile", type=float, help="exceedance level as a quantile")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparse-extremes", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("standardize", help="rank-transform and extract exceedances")
    _common(p)

    p = sub.add_parser("chi", help="pairwise chi matrix and chi curves")
    _common(p)
    p.add_argument("--q-grid", type=_floats, help="comma-separated levels")
    p.add_argument("--n-boot", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("cluster", help="spherical k-means of extremal angles")
    _common(p)
    p.add_argument("--p", type=int)
    p.add_argument("--cut", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)

    p = sub.add_parser("epca", help="PCA of extremal angles")
    _common(p)
    p.add_argument("--p", type=int)
    p.add_argument("--angle-norm", choices=["l1", "l2", "linf"], help="norm of the angles fed to the PCA")

    p = sub.add_parser("faces", help="detect groups of concomitant extremes")
    _common(p)
    p.add_argument("--method", choices=["goix", "simpson", "meyer", "apriori"])
    p.add_argument("--epsilon", type=float)
    p.add_argument("--u", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--criterion", choices=["cond_chi", "eta_test"])
    p.add_argument("--threshold", type=float, help="cond_chi threshold or eta_test level")
    p.add_argument("--cap", type=int)

    for name, hlp in (("learn-tree", "minimum spanning tree on -log chi"),
                      ("fit-graph", "censored fit and greedy AIC search")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        p.add_argument("--censor-quantile", type=float)
        if name == "fit-graph":
            p.add_argument("--max-clique", type=int, choices=[2, 3])

    p = sub.add_parser("simulate", help="simulate from a parametric model")
    _common(p, data=False)
    p.add_argument("--model", choices=["maxlinear", "recml", "logistic", "hr"])
    p.add_argument("--params", help="params JSON file")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("pipeline", help="run every configured stage")
    _common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    over: dict = {}

    def put(section, key, value):
        if value is None:
            return
        if section is None:
            over[key] = value
        else:
            over.setdefault(section, {})[key] = value

    get = lambda name: getattr(args, name, None)  # noqa: E731
    put(None, "input", get("input"))
    put(None, "norm", get("norm"))
    put(None, "output_dir", get("output_dir"))
    if get("k") is not None:
        over["k"] = args.k
        over["quantile"] = None
    elif get("quantile") is not None:
        over["quantile"] = args.quantile
        over["k"] = None
    cmd = args.command
    if cmd == "chi":
        put("chi", "q_grid", get("q_grid"))
        put("chi", "n_boot", get("n_boot"))
        put("chi", "seed", get("seed"))
    elif cmd == "cluster":
        for key in ("p", "cut", "seed", "restarts"):
            put("clustering", key, get(key))
    elif cmd == "epca":
        put("epca", "p", get("p"))
        put("epca", "norm", get("angle_norm"))
    elif cmd == "faces":
        for key in ("method", "epsilon", "u", "delta", "criterion", "threshold", "cap"):
            put("faces", key, get(key))
    elif cmd in ("learn-tree", "fit-graph"):
        put("graph", "censor_quantile", get("censor_quantile"))
        put("graph", "max_clique", get("max_clique"))
        put("graph", "search", cmd == "fit-graph")
    elif cmd == "simulate":
        put("simulation", "model", get("model"))
        put("simulation", "params", get("params"))
        put("simulation", "n", get("n"))
        put("simulation", "seed", get("seed"))
    if STAGE_OF[cmd] is not None:
        over["stages"] = STAGE_OF[cmd]
    cfg = merge_config(PipelineConfig(), over)
    if get("config"):
        cfg = merge_config(cfg, json.loads(Path(args.config).read_text()))
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    report = run_pipeline(cfg)
    status = report.manifest["status"]
    print(f"{status}: wrote {report.output_dir / 'manifest.json'}")
    if report.exit_code:
        print(f"stage {report.manifest.get('failed_stage')} failed: {report.manifest.get('diagnostic')}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
