"""``modelsel`` command line: gen-synth, train, eval, sweep.

Exit codes: 0 success, 1 runtime error, 2 usage error. Results go to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import kernels
from .classifiers import ModelError, ModelSet, TrainHyper, load_model, save_model, train_models
from .dataset import DatasetError, SyntheticSpec, make_synthetic_benchmark, read_container, write_container
from .evaluation import (ProtocolError, cross_validate, format_csv, run_gzsl_protocol,
                         sigma_sweep)
from .fusion import FusionConfig, FusionConfigError, Strategy

MODEL_FILES = {"seen": "seen.msel", "unseen": "unseen.msel", "joint": "joint.msel",
               "selector": "selector.msel"}
MANIFEST = "manifest.json"

_SPEC = SyntheticSpec()
_HYPER = TrainHyper()

# documented defaults per subcommand; flags and config files override these
DEFAULTS = {
    "gen-synth": {
        "seen": _SPEC.n_seen_classes, "unseen": _SPEC.n_unseen_classes, "dim": _SPEC.dim,
        "train_per_class": _SPEC.train_per_class, "test_per_class": _SPEC.test_per_class,
        "aux_per_class": _SPEC.aux_per_class, "cluster_spread": _SPEC.cluster_spread,
        "noise_scale": _SPEC.noise_scale, "center_scale": _SPEC.center_scale,
        "out": None, "seed": 42,
    },
    "train": {
        "out_dir": None, "batch_size": _HYPER.batch_size, "epochs": _HYPER.epochs,
        "lr": _HYPER.learning_rate, "beta1": _HYPER.adam_beta1, "beta2": _HYPER.adam_beta2,
        "eps": _HYPER.adam_eps, "weight_decay": _HYPER.weight_decay,
        "reg_lambda": _HYPER.reg_lambda, "selector_iters": _HYPER.selector_iters,
        "joint_seen_only": False, "seed": 42,
    },
    "eval": {
        "models": None, "strategy": "2way", "sigma": 1.0, "c": None, "o_s": None, "o_u": None,
        "raw_mix": False, "cv": False, "val_fraction": 0.2, "csv": None, "seed": 42,
    },
    "sweep": {
        "models": None, "strategy": "2way-sa", "sigma_list": None, "cv": False,
        "c_list": None, "o_list": None, "val_fraction": 0.2, "raw_mix": False,
        "csv": None, "seed": 42,
    },
}


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}")
    return values


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelsel",
        description="Selector-gated classifier fusion for generalized zero-shot learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help="random seed (default 42)")
        p.add_argument("--config", type=Path, help="file of `key = value` lines; flags win")

    g = sub.add_parser("gen-synth", help="generate a synthetic GZSL container")
    g.add_argument("-o", "--out", type=Path, required=True, help="output .gzsl path")
    g.add_argument("--seen", type=int, help="number of seen classes (10)")
    g.add_argument("--unseen", type=int, help="number of unseen classes (5)")
    g.add_argument("--dim", type=int, help="feature dimension (32)")
    g.add_argument("--train-per-class", type=int, help="real training points per seen class (100)")
    g.add_argument("--test-per-class", type=int, help="test points per class (50)")
    g.add_argument("--aux-per-class", type=int, help="generated points per unseen class (100)")
    g.add_argument("--cluster-spread", type=float, help="std of real points around centers (1.0)")
    g.add_argument("--noise-scale", type=float, help="std of generated points (1.0)")
    g.add_argument("--center-scale", type=float, help="std of class centers (1.0)")
    common(g)

    t = sub.add_parser("train", help="train selector, seen, unseen and joint models")
    t.add_argument("data", type=Path, help="input .gzsl container")
    t.add_argument("-o", "--out-dir", type=Path, required=True, help="directory for model files")
    t.add_argument("--batch-size", type=int, help="mini-batch size (60)")
    t.add_argument("--epochs", type=int, help="training epochs, >= 1 (50)")
    t.add_argument("--lr", type=float, help="Adam learning rate (1e-4)")
    t.add_argument("--beta1", type=float, help="Adam beta1 (0.9)")
    t.add_argument("--beta2", type=float, help="Adam beta2 (0.99)")
    t.add_argument("--eps", type=float, help="Adam epsilon (1e-8)")
    t.add_argument("--weight-decay", type=float, help="softmax L2 penalty (1e-4)")
    t.add_argument("--reg-lambda", type=float, help="selector SVM lambda (1e-2)")
    t.add_argument("--selector-iters", type=int, help="selector iterations (2000)")
    t.add_argument("--joint-seen-only", action="store_true", default=None,
                   help="train the joint model on seen data only (baseline)")
    common(t)

    e = sub.add_parser("eval", help="run the GZSL protocol on the test splits")
    e.add_argument("data", type=Path, help="input .gzsl container")
    e.add_argument("-m", "--models", type=Path, required=True, help="directory written by train")
    e.add_argument("--strategy", choices=[s.value for s in Strategy], help="fusion (2way)")
    e.add_argument("--sigma", type=float, help="sigmoid slope for 2way-sa (1.0)")
    e.add_argument("--c", type=float, help="joint-model weight for 3way")
    e.add_argument("--o-s", type=float, help="seen-branch offset for 3way")
    e.add_argument("--o-u", type=float, help="unseen-branch offset for 3way")
    e.add_argument("--raw-mix", action="store_true", default=None,
                   help="2way-sa mixes raw logits instead of per-branch softmax")
    e.add_argument("--cv", action="store_true", default=None,
                   help="choose fusion knobs by cross-validation on the training splits")
    e.add_argument("--val-fraction", type=float, help="held-out fraction for --cv (0.2)")
    e.add_argument("--csv", type=Path, help="also write the result row as CSV")
    common(e)

    s = sub.add_parser("sweep", help="sigma sweep or cross-validation grid, as CSV")
    s.add_argument("data", type=Path, help="input .gzsl container")
    s.add_argument("-m", "--models", type=Path, required=True, help="directory written by train")
    s.add_argument("--sigma-list", type=_float_list, help="sigmas to sweep, e.g. 0.1,1,10")
    s.add_argument("--cv", action="store_true", default=None,
                   help="run the cross-validation grid instead of a sigma sweep")
    s.add_argument("--strategy", choices=[v.value for v in Strategy],
                   help="strategy for --cv (2way-sa)")
    s.add_argument("--c-list", type=_float_list, help="c grid for --cv")
    s.add_argument("--o-list", type=_float_list, help="offset grid for --cv")
    s.add_argument("--val-fraction", type=float, help="held-out fraction for --cv (0.2)")
    s.add_argument("--raw-mix", action="store_true", default=None,
                   help="2way-sa mixes raw logits")
    s.add_argument("--csv", type=Path, help="CSV output path (stdout if omitted)")
    common(s)
    return parser


def read_config_file(path: Path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected `key = value`")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def effective_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    defaults = DEFAULTS[command]
    merged = dict(defaults)
    if args.config is not None:
        try:
            entries = read_config_file(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        for key, raw in entries.items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r} for {command}")
            merged[key] = _coerce(key, raw, defaults[key])
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


_LIST_KEYS = {"sigma_list", "c_list", "o_list"}
_PATH_KEYS = {"out", "out_dir", "models", "csv"}
_FLOAT_KEYS = {"c", "o_s", "o_u"}


def _coerce(key, raw, default):
    try:
        if key in _LIST_KEYS:
            return _float_list(raw)
        if key in _PATH_KEYS:
            return Path(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if isinstance(default, bool):
            return _bool(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"config key {key}: {exc}") from None


def _jsonable(cfg: dict) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()}


# --- commands -------------------------------------------------------------------

def cmd_gen_synth(cfg: dict) -> int:
    try:
        spec = SyntheticSpec(
            n_seen_classes=cfg["seen"], n_unseen_classes=cfg["unseen"], dim=cfg["dim"],
            train_per_class=cfg["train_per_class"], test_per_class=cfg["test_per_class"],
            aux_per_class=cfg["aux_per_class"], cluster_spread=cfg["cluster_spread"],
            noise_scale=cfg["noise_scale"], center_scale=cfg["center_scale"], seed=cfg["seed"])
        spec.validate()
    except DatasetError as exc:
        raise UsageError(str(exc)) from None
    dataset = make_synthetic_benchmark(spec)
    write_container(dataset, cfg["out"])
    counts = ", ".join(f"{name}={len(dataset[name])}" for name in dataset.splits)
    print(f"wrote {cfg['out']}: {dataset.catalog.n_seen} seen + {dataset.catalog.n_unseen} "
          f"unseen classes, dim={dataset.dim}, {counts}")
    return 0


def _hyper_from(cfg: dict) -> TrainHyper:
    try:
        return TrainHyper(
            batch_size=cfg["batch_size"], epochs=cfg["epochs"], learning_rate=cfg["lr"],
            adam_beta1=cfg["beta1"], adam_beta2=cfg["beta2"], adam_eps=cfg["eps"],
            weight_decay=cfg["weight_decay"], reg_lambda=cfg["reg_lambda"],
            selector_iters=cfg["selector_iters"], seed=cfg["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(cfg: dict) -> int:
    hyper = _hyper_from(cfg)
    dataset = read_container(cfg["data"])
    models = train_models(dataset, hyper, joint_uses_aux=not cfg["joint_seen_only"])
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    for role, name in MODEL_FILES.items():
        save_model(getattr(models, role), out_dir / name)
    manifest = {
        "command": "train",
        "config": _jsonable(cfg),
        "hyper": asdict(hyper),
        "seed": hyper.seed,
        "backend": kernels.BACKEND,
        "models": MODEL_FILES,
    }
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(MODEL_FILES)} models to {out_dir} (seed {hyper.seed})")
    return 0


def _load_models(models_dir: Path, dataset) -> tuple[ModelSet, TrainHyper]:
    loaded = {}
    for role, name in MODEL_FILES.items():
        path = Path(models_dir) / name
        model = load_model(path)
        if model.dim != dataset.dim:
            raise ModelError(f"{path}: model dim {model.dim} does not match "
                             f"dataset dim {dataset.dim}")
        loaded[role] = model
    manifest_path = Path(models_dir) / MANIFEST
    hyper = TrainHyper()
    if manifest_path.exists():
        hyper = TrainHyper(**json.loads(manifest_path.read_text())["hyper"])
    return ModelSet(**loaded), hyper


def _print_report(report) -> None:
    print("ts     tr     H")
    print(f"{100 * report.acc_unseen:.1f} {100 * report.acc_seen:.1f} {100 * report.harmonic:.1f}")


def cmd_eval(cfg: dict) -> int:
    strategy = Strategy(cfg["strategy"])
    knobs = (cfg["c"], cfg["o_s"], cfg["o_u"])
    if strategy is Strategy.THREE_WAY and not cfg["cv"] and None in knobs:
        raise UsageError("3way needs --c, --o-s and --o-u, or --cv")
    try:
        base = FusionConfig(strategy, sigma=cfg["sigma"],
                            c=1.0 if cfg["c"] is None else cfg["c"],
                            o_s=0.0 if cfg["o_s"] is None else cfg["o_s"],
                            o_u=0.0 if cfg["o_u"] is None else cfg["o_u"],
                            raw_mix=cfg["raw_mix"])
    except FusionConfigError as exc:
        raise UsageError(str(exc)) from None
    dataset = read_container(cfg["data"])
    models, hyper = _load_models(cfg["models"], dataset)
    fusion_cfg = base
    if cfg["cv"]:
        fusion_cfg = cross_validate(dataset, strategy, val_fraction=cfg["val_fraction"],
                                    seed=cfg["seed"], hyper=hyper, base=base).best_config
        print(f"cv: sigma={fusion_cfg.sigma:g} c={fusion_cfg.c:g} "
              f"o_s={fusion_cfg.o_s:g} o_u={fusion_cfg.o_u:g}", file=sys.stderr)
    report = run_gzsl_protocol(dataset, models, fusion_cfg)
    _print_report(report)
    if cfg["csv"] is not None:
        Path(cfg["csv"]).write_text(format_csv(
            [(fusion_cfg, report.acc_seen, report.acc_unseen, report.harmonic)]))
    return 0


def cmd_sweep(cfg: dict) -> int:
    if not cfg["cv"] and cfg["sigma_list"] is None:
        raise UsageError("give --sigma-list, or --cv for a cross-validation grid")
    for key in ("sigma_list", "c_list", "o_list"):
        if cfg[key] is not None and len(cfg[key]) == 0:
            raise UsageError(f"--{key.replace('_', '-')} is empty")
    if cfg["sigma_list"] is not None and min(cfg["sigma_list"]) <= 0:
        raise UsageError("sigmas must be > 0")
    dataset = read_container(cfg["data"])
    models, hyper = _load_models(cfg["models"], dataset)

    if cfg["cv"]:
        grids = {}
        if cfg["sigma_list"] is not None:
            grids["sigma"] = cfg["sigma_list"]
        if cfg["c_list"] is not None:
            grids["c"] = cfg["c_list"]
        if cfg["o_list"] is not None:
            grids["o_s"] = grids["o_u"] = cfg["o_list"]
        result = cross_validate(dataset, cfg["strategy"], grids, cfg["val_fraction"],
                                cfg["seed"], hyper,
                                base=FusionConfig(cfg["strategy"], raw_mix=cfg["raw_mix"]))
        rows = [(c, r.acc_seen, r.acc_unseen, r.harmonic) for c, r in result.rows]
        best = rows[[c for c, *_ in rows].index(result.best_config)]
    else:
        base = FusionConfig(Strategy.TWO_WAY_SA, raw_mix=cfg["raw_mix"])
        swept = sigma_sweep(dataset, models, cfg["sigma_list"], raw_mix=cfg["raw_mix"])
        rows = [(FusionConfig(Strategy.TWO_WAY_SA, sigma=r.sigma, c=base.c, o_s=base.o_s,
                              o_u=base.o_u, raw_mix=base.raw_mix),
                 r.acc_seen, r.acc_unseen, r.harmonic) for r in swept]
        best = rows[int(np.argmax([r[3] for r in rows]))]

    text = format_csv(rows)
    best_line = format_csv([best]).splitlines()[1]
    if cfg["csv"] is None:
        sys.stdout.write(text)
        print(f"best: {best_line}", file=sys.stderr)
    else:
        Path(cfg["csv"]).write_text(text)
        print(f"best: {best_line}")
    return 0


COMMANDS = {"gen-synth": cmd_gen_synth, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = effective_config(args.command, args)
        if hasattr(args, "data"):
            cfg["data"] = args.data
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"modelsel {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, ModelError, ProtocolError, FusionConfigError, OSError) as exc:
        print(f"modelsel {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
