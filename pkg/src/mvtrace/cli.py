"""Command-line entry point orchestrating the full pipeline.

Subcommands over JSON config files:

* ``generate`` — write a synthetic dataset directory,
* ``run``      — cross-validated representation + trace regression,
* ``sweep``    — run a grid of configs sharing one fold plan,
* ``map``      — recompute the significance map from stored fold betas,
* ``inspect``  — print MVRL/MVNN file headers.

Every run writes a ``manifest.json`` with the fully resolved config; passing
a manifest back through ``--config`` reproduces the run bit-for-bit.  Errors
leave a machine-readable JSON object on stderr and a nonzero exit code.
``MVTRACE_LOG`` in {error, info, debug} controls logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, evaluation, io, synth
from .autoencoders import (
    ArchitectureConfig,
    AutoencoderSpec,
    PcaSpec,
    RawSpec,
)
from .data import load_dataset
from .mesh import build_laplacian
from .trace_regression import FistaConfig, RegularizationConfig, export_beta

logger = logging.getLogger(__name__)

ARCH_CHOICES = ("mdae", "concat-ae", "monomodal-task", "monomodal-rest", "pca", "raw")


class ConfigError(ValueError):
    pass


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except Exception as exc:  # noqa: BLE001 - single CLI failure boundary
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)},
            sys.stderr,
        )
        sys.stderr.write("\n")
        logger.debug("command failed", exc_info=True)
        return 1


def _setup_logging() -> None:
    level_name = os.environ.get("MVTRACE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level_name, logging.ERROR))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvtrace", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mvtrace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a synthetic dataset directory")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--out")
    p_gen.add_argument("--seed", type=int)
    p_gen.set_defaults(handler=cmd_generate)

    p_run = sub.add_parser("run", help="cross-validated pipeline on a dataset")
    _add_run_flags(p_run)
    p_run.set_defaults(handler=cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid of run configs on one fold plan")
    _add_run_flags(p_sweep)
    p_sweep.set_defaults(handler=cmd_sweep)

    p_map = sub.add_parser("map", help="recompute significance map from fold betas")
    p_map.add_argument("--results", required=True)
    p_map.add_argument("--t-crit", type=float, default=2.45)
    p_map.add_argument("--reduction", choices=evaluation.REDUCTIONS, default="signed-norm")
    p_map.set_defaults(handler=cmd_map)

    p_inspect = sub.add_parser("inspect", help="print matrix/model file headers")
    p_inspect.add_argument("paths", nargs="+")
    p_inspect.set_defaults(handler=cmd_inspect)
    return parser


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True)
    parser.add_argument("--out")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--arch", choices=ARCH_CHOICES)
    parser.add_argument("--enc", type=int)
    parser.add_argument("--enc-split", metavar="T,R")
    parser.add_argument("--hidden-act", choices=("linear", "relu"))
    parser.add_argument("--output-act", choices=("linear", "sigmoid"))
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch", type=int)
    parser.add_argument("--lr", type=float)


def _load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    # manifests are valid configs: unwrap the resolved config they embed
    if "config" in cfg and "command" in cfg:
        cfg = cfg["config"]
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config field: {key}")
    return cfg[key]


def _write_manifest(out_dir: Path, command: str, cfg: dict) -> None:
    manifest = {"command": command, "package_version": __version__, "config": cfg}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- generate ----------------------------------------------------------------

GENERATE_DEFAULTS = {
    "n_subjects": 40,
    "mesh": "icosphere-2",
    "d_task": 24,
    "d_rest": 30,
    "latent_dim_true": 4,
    "n_clusters": 3,
    "cluster_size": 8,
    "noise_sigma": 0.05,
    "view_noise_sigma": 0.4,
    "loading_weights": [1.0, 1.0],
    "smoothing": 1.0,
    "standardize_scores": True,
    "seed": 0,
}


def cmd_generate(args) -> int:
    cfg = {**GENERATE_DEFAULTS, **_load_config(args.config)}
    if args.out:
        cfg["out"] = args.out
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = Path(_require(cfg, "out"))
    known = set(GENERATE_DEFAULTS) | {"out"}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown generate config field(s): {sorted(unknown)}")
    try:
        gen_cfg = synth.GeneratorConfig(
            **{k: tuple(v) if k == "loading_weights" else v
               for k, v in cfg.items() if k != "out"}
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid generate config: {exc}") from exc
    subjects, mesh, ground_truth = synth.generate(gen_cfg)
    synth.write_dataset(out, subjects, mesh, ground_truth)
    _write_manifest(out, "generate", cfg)
    print(f"wrote {len(subjects)} subjects on {mesh.vertex_count} vertices to {out}")
    return 0


# --- run ---------------------------------------------------------------------

RUN_DEFAULTS = {
    "arch": "mdae",
    "enc": 10,
    "enc_split": None,
    "hidden_dims": None,
    "hidden_activation": "linear",
    "output_activation": "linear",
    "epochs": 300,
    "batch_size": 500,
    "learning_rate": 1e-3,
    "alpha": 5e-4,
    "eta": 1e-3,
    "squared_rows": False,
    "fista": {},
    "cv": {},
    "jobs": 1,
    "seed": 0,
}


def _apply_run_flags(cfg: dict, args) -> dict:
    if args.out:
        cfg["out"] = args.out
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    if args.arch:
        cfg["arch"] = args.arch
    if args.enc is not None:
        cfg["enc"] = args.enc
    if args.enc_split:
        try:
            t, r = (int(v) for v in args.enc_split.split(","))
        except ValueError:
            raise ConfigError(f"--enc-split expects 'T,R', got {args.enc_split!r}")
        cfg["enc_split"] = [t, r]
    if args.hidden_act:
        cfg["hidden_activation"] = args.hidden_act
    if args.output_act:
        cfg["output_activation"] = args.output_act
    if args.epochs is not None:
        cfg["epochs"] = args.epochs
    if args.batch is not None:
        cfg["batch_size"] = args.batch
    if args.lr is not None:
        cfg["learning_rate"] = args.lr
    return cfg


def _build_spec(cfg: dict):
    arch = cfg["arch"]
    if arch not in ARCH_CHOICES:
        raise ConfigError(f"arch must be one of {ARCH_CHOICES}, got {arch!r}")
    if arch == "pca":
        return PcaSpec(enc=int(cfg["enc"]))
    if arch == "raw":
        columns = cfg.get("enc") if cfg.get("raw_truncate", False) else None
        return RawSpec(columns=columns)
    hidden = cfg.get("hidden_dims")
    if hidden is None:
        from .autoencoders import DEFAULT_HIDDEN

        hidden = DEFAULT_HIDDEN[arch]
    try:
        config = ArchitectureConfig(
            kind=arch,
            enc=int(cfg["enc"]),
            hidden_dims=tuple(hidden),
            enc_split=tuple(cfg["enc_split"]) if cfg.get("enc_split") else None,
            hidden_activation=cfg["hidden_activation"],
            output_activation=cfg["output_activation"],
        )
    except ValueError as exc:
        raise ConfigError(f"invalid architecture config: {exc}") from exc
    return AutoencoderSpec(
        config=config,
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]),
        learning_rate=float(cfg["learning_rate"]),
    )


def _build_reg_fista(cfg: dict):
    try:
        reg = RegularizationConfig(
            alpha=float(cfg["alpha"]),
            eta=float(cfg["eta"]),
            squared_rows=bool(cfg.get("squared_rows", False)),
        )
        fista = FistaConfig(**cfg.get("fista", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid regularization/fista config: {exc}") from exc
    return reg, fista


def _resolve_run_config(args) -> dict:
    cfg = {**RUN_DEFAULTS, **_load_config(args.config)}
    cfg = _apply_run_flags(cfg, args)
    _require(cfg, "dataset")
    _require(cfg, "out")
    return cfg


def _run_one(cfg: dict, label: str | None = None):
    """Shared run/sweep core: returns (SweepPoint, CvResult, plan, subjects)."""
    subjects, mesh, _ = load_dataset(cfg["dataset"])
    laplacian = build_laplacian(mesh)
    spec = _build_spec(cfg)
    reg, fista = _build_reg_fista(cfg)
    cv_cfg = cfg.get("cv", {})
    n_folds = int(cv_cfg.get("folds", 10))
    cv_seed = int(cv_cfg.get("seed", cfg["seed"]))
    plan = evaluation.make_folds(len(subjects), n_folds, cv_seed)
    result = evaluation.run_cv(
        subjects, laplacian, spec, reg, fista, plan,
        seed=int(cfg["seed"]), jobs=int(cfg.get("jobs", 1)),
    )
    point = evaluation.SweepPoint(label=label or cfg["arch"], spec=spec, reg=reg)
    return point, result


def _write_run_outputs(out: Path, entries, t_crit: float = 2.45) -> None:
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_fold_csv(out / "folds.csv", entries)
    evaluation.write_summary_csv(out / "summary.csv", entries)
    # per-fold artifacts only for single runs
    if len(entries) == 1:
        _, result = entries[0]
        for fold in result.folds:
            export_beta(out / f"beta_fold{fold.fold_id}.mvrl", fold.beta, tol=1e-12)
        with open(out / "convergence.csv", "w", newline="") as fh:
            fh.write("fold,iteration,objective\n")
            for fold in result.folds:
                for i, val in enumerate(fold.objectives):
                    fh.write(f"{fold.fold_id},{i},{format(float(val), '.12g')}\n")
        sig = evaluation.significance_map(result.betas, t_crit=t_crit)
        evaluation.write_significance_csv(out / "significance.csv", sig)
        io.write_matrix(out / "significance_t.mvrl", sig.t)


def cmd_run(args) -> int:
    cfg = _resolve_run_config(args)
    out = Path(cfg["out"])
    point, result = _run_one(cfg)
    _write_run_outputs(out, [(point, result)])
    _write_manifest(out, "run", cfg)
    print(
        f"{point.label}: mean MSE {result.mean_mse:.6g} "
        f"(+/- {result.stderr_mse:.2g}), mean R2 {result.mean_r2:.6g}"
    )
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve_run_config(args)
    grid = cfg.get("grid")
    if not grid or not isinstance(grid, list):
        raise ConfigError("sweep config needs a nonempty 'grid' list of override objects")
    out = Path(cfg["out"])
    entries = []
    for i, overrides in enumerate(grid):
        if not isinstance(overrides, dict):
            raise ConfigError(f"grid[{i}] must be an object of config overrides")
        merged = {**cfg, **overrides}
        merged.pop("grid", None)
        label = overrides.get("label") or _grid_label(cfg, overrides, i)
        merged.pop("label", None)
        point, result = _run_one(merged, label=label)
        entries.append((point, result))
    _write_run_outputs(out, entries)
    _write_manifest(out, "sweep", cfg)
    for point, result in entries:
        print(f"{point.label}: mean MSE {result.mean_mse:.6g}, mean R2 {result.mean_r2:.6g}")
    return 0


def _grid_label(base: dict, overrides: dict, index: int) -> str:
    keys = [k for k in overrides if k != "label"]
    if not keys:
        return f"point{index}"
    parts = []
    for k in sorted(keys):
        v = overrides[k]
        if isinstance(v, (list, tuple)):
            v = "-".join(str(x) for x in v)
        parts.append(f"{k}={v}")
    return ",".join(parts)


def cmd_map(args) -> int:
    results = Path(args.results)
    beta_files = sorted(results.glob("beta_fold*.mvrl"))
    if len(beta_files) < 2:
        raise FileNotFoundError(
            f"{results}: need at least 2 beta_fold*.mvrl files, found {len(beta_files)}"
        )
    betas = [io.read_matrix(p) for p in beta_files]
    sig = evaluation.significance_map(betas, t_crit=args.t_crit, reduction=args.reduction)
    evaluation.write_significance_csv(results / "significance.csv", sig)
    io.write_matrix(results / "significance_t.mvrl", sig.t)
    print(
        f"significance map over {len(betas)} folds: "
        f"{int(sig.mask.sum())} vertices with t > {args.t_crit}"
    )
    return 0


def cmd_inspect(args) -> int:
    for path in args.paths:
        info = io.describe(path)
        print(f"{path}: {json.dumps(info, sort_keys=True)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
