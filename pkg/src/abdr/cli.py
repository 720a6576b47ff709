"""Command line front end: dataset -> graph -> solve -> cluster -> metrics.

Verbs:
  run    one full pipeline run, dumping every artifact to the output dir
  sweep  the pipeline across a gamma grid, reusing the graph and the
         factorized Z-step system (alpha does not depend on gamma)
  gen    dump a generated dataset as data.csv (+ labels.csv)

Configuration comes from flags, or from a JSON file via --config with flags
taking precedence.  run.json archives the fully resolved configuration
(auto values included) and can be fed back through --config to reproduce a
run byte for byte.  The ABDR_THREADS environment variable caps BLAS-level
parallelism (0 or unset leaves the libraries' own defaults).
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from pathlib import Path


def _cap_threads():
    cap = os.environ.get("ABDR_THREADS")
    if not cap:
        return
    try:
        n = int(cap)
    except ValueError:
        raise SystemExit(f"ABDR_THREADS must be an integer (got {cap!r})")
    if n > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, str(n))


_cap_threads()

import numpy as np

from . import dataset as ds
from . import graph as gr
from . import metrics as mt
from . import solver as sv
from . import spectral as sp


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG = {
    "dataset": {
        "kind": "example1",
        "noise_std": ds.EXAMPLE3_NOISE_STD,
        "subspace_k": 3,
        "ambient_dim": 6,
        "sub_dims": [1, 1, 1],
        "counts": [15, 15, 15],
        "data_path": None,
        "labels_path": None,
        "header": False,
        "normalize": False,
    },
    "graph": {"knn_k": gr.DEFAULT_KNN_K, "phi": "auto"},
    "solver": {
        "gamma": 1.0,
        "mu1": 1.0,
        "mu2": 1.0,
        "alpha": "auto",
        "max_iter": 200,
        "tol_primal": 1e-5,
        "tol_change": 1e-6,
        "mode": "both",
    },
    "clustering": {"k": "auto", "rel_threshold": sp.DEFAULT_REL_THRESHOLD},
    "seed": 0,
    "output_dir": "abdr_out",
}


def _merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in out:
            raise ConfigError(f"unknown config field {path + key!r}")
        if isinstance(out[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config field {path + key!r} must be an object")
            out[key] = _merge(out[key], val, path + key + ".")
        else:
            out[key] = val
    return out


def _positive(cfg, section, key, strict=True):
    val = cfg[section][key]
    ok = isinstance(val, (int, float)) and (val > 0 if strict else val >= 0)
    if not ok:
        raise ConfigError(f"{section}.{key} must be {'positive' if strict else 'nonnegative'} (got {val!r})")


def validate_config(cfg: dict) -> None:
    kind = cfg["dataset"]["kind"]
    if kind not in ("example1", "example2", "example3", "subspaces", "csv"):
        raise ConfigError(f"dataset.kind must be one of example1|example2|example3|subspaces|csv (got {kind!r})")
    if kind == "csv":
        path = cfg["dataset"]["data_path"]
        if not path:
            raise ConfigError("dataset.data_path is required for dataset.kind=csv")
        if not Path(path).exists():
            raise ConfigError(f"dataset.data_path does not exist: {path}")
        labels = cfg["dataset"]["labels_path"]
        if labels and not Path(labels).exists():
            raise ConfigError(f"dataset.labels_path does not exist: {labels}")
    _positive(cfg, "dataset", "noise_std", strict=False)
    if not isinstance(cfg["graph"]["knn_k"], int) or cfg["graph"]["knn_k"] < 1:
        raise ConfigError(f"graph.knn_k must be a positive integer (got {cfg['graph']['knn_k']!r})")
    phi = cfg["graph"]["phi"]
    if phi != "auto" and (not isinstance(phi, (int, float)) or phi < 0):
        raise ConfigError(f"graph.phi must be 'auto' or a nonnegative number (got {phi!r})")
    _positive(cfg, "solver", "gamma", strict=False)
    _positive(cfg, "solver", "mu1")
    _positive(cfg, "solver", "mu2")
    alpha = cfg["solver"]["alpha"]
    if alpha != "auto" and (not isinstance(alpha, (int, float)) or alpha <= 0):
        raise ConfigError(f"solver.alpha must be 'auto' or a positive number (got {alpha!r})")
    if cfg["solver"]["mode"] not in sv.MODES:
        raise ConfigError(f"solver.mode must be one of {sv.MODES} (got {cfg['solver']['mode']!r})")
    _positive(cfg, "solver", "tol_primal")
    _positive(cfg, "solver", "tol_change")
    k = cfg["clustering"]["k"]
    if k != "auto" and (not isinstance(k, int) or k < 1):
        raise ConfigError(f"clustering.k must be 'auto' or a positive integer (got {k!r})")
    rel = cfg["clustering"]["rel_threshold"]
    if not isinstance(rel, (int, float)) or not 0 < rel < 1:
        raise ConfigError(f"clustering.rel_threshold must lie in (0, 1) (got {rel!r})")
    if not isinstance(cfg["seed"], int):
        raise ConfigError(f"seed must be an integer (got {cfg['seed']!r})")


def _sub_seeds(root_seed: int):
    children = np.random.SeedSequence(root_seed).spawn(2)
    return (int(children[0].generate_state(1)[0]),
            int(children[1].generate_state(1)[0]))


def load_dataset(cfg: dict):
    """Materialize (DataMatrix, truth_or_None, true_k_or_None) from config."""
    dcfg = cfg["dataset"]
    kind = dcfg["kind"]
    data_seed, _ = _sub_seeds(cfg["seed"])
    if kind == "example1":
        lab = ds.gen_example1(data_seed)
    elif kind == "example2":
        lab = ds.gen_example2(data_seed)
    elif kind == "example3":
        lab = ds.gen_example3(data_seed, noise_std=dcfg["noise_std"])
    elif kind == "subspaces":
        lab = ds.gen_subspaces(dcfg["subspace_k"], dcfg["ambient_dim"],
                               dcfg["sub_dims"], dcfg["counts"],
                               dcfg["noise_std"], data_seed)
    else:
        X = ds.load_csv(dcfg["data_path"], header=dcfg["header"])
        truth = (ds.load_labels_csv(dcfg["labels_path"])
                 if dcfg["labels_path"] else None)
        if truth is not None and truth.size != X.n:
            raise ConfigError(
                f"label file has {truth.size} rows but data has {X.n} columns")
        k = int(np.unique(truth).size) if truth is not None else None
        X = ds.normalize_columns(X) if dcfg["normalize"] else X
        return X, truth, k
    X = ds.normalize_columns(lab.data) if dcfg["normalize"] else lab.data
    return X, lab.truth, lab.subspace_count


def _solver_config(cfg: dict, gamma=None, mode=None) -> sv.SolverConfig:
    scfg = cfg["solver"]
    return sv.SolverConfig(
        gamma=scfg["gamma"] if gamma is None else gamma,
        mu1=scfg["mu1"], mu2=scfg["mu2"], alpha=scfg["alpha"],
        max_iter=scfg["max_iter"], tol_primal=scfg["tol_primal"],
        tol_change=scfg["tol_change"],
        mode=scfg["mode"] if mode is None else mode)


def run(cfg: dict) -> dict:
    """Execute one pipeline run and write every artifact; returns metrics."""
    validate_config(cfg)
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)

    X, truth, true_k = load_dataset(cfg)
    G = gr.build_graph(X, K=cfg["graph"]["knn_k"], phi=cfg["graph"]["phi"])
    config = _solver_config(cfg)
    _, kmeans_seed = _sub_seeds(cfg["seed"])
    result = sp.cluster_pipeline(X, G, config, k=cfg["clustering"]["k"],
                                 seed=kmeans_seed,
                                 rel_threshold=cfg["clustering"]["rel_threshold"])
    W = sp.affinity(result.Z)

    ds.save_csv(result.Z, outdir / "Z.csv")
    ds.save_csv(W, outdir / "W.csv")
    sp.save_pgm(W, outdir / "W.pgm")
    result.trace.save_csv(outdir / "trace.csv")
    ds.save_labels(result.labels, outdir / "labels.csv")

    err = mt.clustering_error(result.labels, truth) if truth is not None else None
    obm = mt.off_block_mass(result.Z, truth) if truth is not None else None
    report = mt.metrics_report(err, obm, result.estimated_k, true_k,
                               len(result.trace), result.trace.objective[-1])
    (outdir / "metrics.json").write_text(report, encoding="utf-8")

    resolved = copy.deepcopy(cfg)
    resolved["graph"]["phi"] = G.phi
    resolved["solver"]["alpha"] = sv.resolve_alpha(config, G)
    resolved["clustering"]["k"] = result.estimated_k
    (outdir / "run.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return json.loads(report)


def sweep(cfg: dict, gammas) -> list:
    """Run the pipeline per gamma, reusing the graph and the Z-step system."""
    validate_config(cfg)
    if not gammas:
        raise ConfigError("sweep requires a non-empty gamma list")
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)

    X, truth, true_k = load_dataset(cfg)
    G = gr.build_graph(X, K=cfg["graph"]["knn_k"], phi=cfg["graph"]["phi"])
    _, kmeans_seed = _sub_seeds(cfg["seed"])
    # alpha (and hence the factorization) is gamma-independent: build once.
    gram = sv.build_gram_system(X, G, _solver_config(cfg, gamma=gammas[0]))

    rows = []
    for gamma in gammas:
        config = _solver_config(cfg, gamma=gamma)
        result = sp.cluster_pipeline(X, G, config, k=cfg["clustering"]["k"],
                                     seed=kmeans_seed,
                                     rel_threshold=cfg["clustering"]["rel_threshold"],
                                     gram=gram)
        err = mt.clustering_error(result.labels, truth) if truth is not None else None
        obm = mt.off_block_mass(result.Z, truth) if truth is not None else None
        rows.append({
            "gamma": gamma,
            "estimated_k": result.estimated_k,
            "clustering_error": err,
            "off_block_mass": obm,
            "iterations": len(result.trace),
            "final_objective": result.trace.objective[-1],
        })
    with open(outdir / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma", "estimated_k", "clustering_error",
                         "off_block_mass", "iterations", "final_objective"])
        for row in rows:
            writer.writerow([
                "%.17g" % row["gamma"], row["estimated_k"],
                "" if row["clustering_error"] is None else "%.17g" % row["clustering_error"],
                "" if row["off_block_mass"] is None else "%.17g" % row["off_block_mass"],
                row["iterations"], "%.17g" % row["final_objective"]])
    return rows


def gen(cfg: dict) -> None:
    """Write the configured dataset as data.csv plus labels.csv."""
    validate_config(cfg)
    if cfg["dataset"]["kind"] == "csv":
        raise ConfigError("gen requires a generated dataset kind, not csv")
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    X, truth, _ = load_dataset(cfg)
    ds.save_csv(X.values, outdir / "data.csv")
    ds.save_labels(truth, outdir / "labels.csv")


def _int_or_auto(text):
    return text if text == "auto" else int(text)


def _float_or_auto(text):
    return text if text == "auto" else float(text)


def _int_list(text):
    return [int(tok) for tok in text.split(",") if tok]


def _float_list(text):
    return [float(tok) for tok in text.split(",") if tok]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abdr",
        description="Convex subspace clustering via fused block diagonal representation")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--dataset", dest="kind",
                       choices=["example1", "example2", "example3", "subspaces", "csv"])
        p.add_argument("--noise-std", type=float)
        p.add_argument("--subspace-k", type=int)
        p.add_argument("--ambient-dim", type=int)
        p.add_argument("--sub-dims", type=_int_list, metavar="D1,D2,...")
        p.add_argument("--counts", type=_int_list, metavar="N1,N2,...")
        p.add_argument("--data-path")
        p.add_argument("--labels-path")
        p.add_argument("--header", action="store_true", default=None,
                       help="skip the first line of the data CSV")
        p.add_argument("--normalize", action="store_true", default=None,
                       help="unit-normalize the data columns before solving")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", dest="output_dir")

    def solver_opts(p):
        p.add_argument("--knn-k", type=int)
        p.add_argument("--phi", type=_float_or_auto)
        p.add_argument("--gamma", type=float)
        p.add_argument("--mu1", type=float)
        p.add_argument("--mu2", type=float)
        p.add_argument("--alpha", type=_float_or_auto)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--tol-primal", type=float)
        p.add_argument("--tol-change", type=float)
        p.add_argument("--mode", choices=list(sv.MODES))
        p.add_argument("--k", type=_int_or_auto)
        p.add_argument("--rel-threshold", type=float)

    p_run = sub.add_parser("run", help="run the full pipeline once")
    common(p_run)
    solver_opts(p_run)

    p_sweep = sub.add_parser("sweep", help="run the pipeline across a gamma grid")
    common(p_sweep)
    solver_opts(p_sweep)
    p_sweep.add_argument("--gammas", type=_float_list, required=True,
                         metavar="G1,G2,...")

    p_gen = sub.add_parser("gen", help="dump a generated dataset to CSV")
    common(p_gen)
    return parser


_FLAG_MAP = {
    "kind": ("dataset", "kind"),
    "noise_std": ("dataset", "noise_std"),
    "subspace_k": ("dataset", "subspace_k"),
    "ambient_dim": ("dataset", "ambient_dim"),
    "sub_dims": ("dataset", "sub_dims"),
    "counts": ("dataset", "counts"),
    "data_path": ("dataset", "data_path"),
    "labels_path": ("dataset", "labels_path"),
    "header": ("dataset", "header"),
    "normalize": ("dataset", "normalize"),
    "knn_k": ("graph", "knn_k"),
    "phi": ("graph", "phi"),
    "gamma": ("solver", "gamma"),
    "mu1": ("solver", "mu1"),
    "mu2": ("solver", "mu2"),
    "alpha": ("solver", "alpha"),
    "max_iter": ("solver", "max_iter"),
    "tol_primal": ("solver", "tol_primal"),
    "tol_change": ("solver", "tol_change"),
    "mode": ("solver", "mode"),
    "k": ("clustering", "k"),
    "rel_threshold": ("clustering", "rel_threshold"),
    "seed": ("seed",),
    "output_dir": ("output_dir",),
}


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file does not exist: {path}")
        try:
            file_cfg = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        cfg = _merge(cfg, file_cfg)
    for flag, keys in _FLAG_MAP.items():
        val = getattr(args, flag, None)
        if val is None:
            continue
        target = cfg
        for key in keys[:-1]:
            target = target[key]
        target[keys[-1]] = val
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.verb == "run":
            metrics = run(cfg)
            print(json.dumps(metrics, indent=2, sort_keys=True))
        elif args.verb == "sweep":
            for row in sweep(cfg, args.gammas):
                print(row)
        else:
            gen(cfg)
    except (ConfigError, ValueError, OSError, sv.DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
