"""GZSL evaluation: per-class top-1 accuracy, harmonic mean, cross-validation
of fusion knobs and sigma sweeps."""

from __future__ import annotations

import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .classifiers import ModelSet, TrainHyper, train_models
from .dataset import DatasetError, GzslDataset, Split
from .fusion import FusionConfig, Strategy, compute_scores, fuse_scores

CSV_HEADER = "sigma,c,o_s,o_u,acc_seen,acc_unseen,harmonic"

DEFAULT_SIGMAS = (0.1, 0.3, 1.0, 3.0, 10.0, 30.0)
DEFAULT_CS = (0.0, 0.25, 0.5, 1.0, 2.0)
DEFAULT_OFFSETS = (0.0, 0.5, 1.0, 2.0)


class ProtocolError(ValueError):
    pass


def per_class_top1(predictions, labels, classes) -> float:
    """Top-1 accuracy per class, averaged uniformly over ``classes``."""
    return float(np.mean(list(per_class_accuracies(predictions, labels, classes).values())))


def per_class_accuracies(predictions, labels, classes) -> dict:
    predictions = np.asarray(predictions).ravel()
    labels = np.asarray(labels).ravel()
    if predictions.shape != labels.shape:
        raise ProtocolError("predictions and labels disagree on count")
    classes = list(classes)
    if not classes:
        raise ProtocolError("no classes to evaluate")
    stray = set(labels.tolist()) - set(classes)
    if stray:
        raise ProtocolError(f"labels {sorted(map(str, stray))} are outside the evaluated classes")
    out = {}
    for c in classes:
        mask = labels == c
        count = int(mask.sum())
        if count == 0:
            raise ProtocolError(f"class {c} has no test samples")
        out[c] = float(np.sum(predictions[mask] == c)) / count
    return out


def harmonic_mean(acc_s: float, acc_u: float) -> float:
    total = acc_s + acc_u
    return 0.0 if total == 0 else 2.0 * acc_s * acc_u / total


@dataclass(frozen=True)
class EvalReport:
    acc_seen: float
    acc_unseen: float
    harmonic: float
    per_class: dict[int, float]
    n_total: int
    n_routed_seen: int
    n_routed_unseen: int


class _Scored(NamedTuple):
    """Model outputs on the stacked test points, computed once per model set."""

    s: np.ndarray
    g_s: np.ndarray
    g_u: np.ndarray
    g_t: np.ndarray | None
    labels: np.ndarray
    n_seen_points: int


def _score_tests(dataset: GzslDataset, models: ModelSet) -> _Scored:
    seen_split, unseen_split = dataset["test_seen"], dataset["test_unseen"]
    x = np.concatenate([seen_split.features, unseen_split.features])
    s, g_s, g_u, g_t = compute_scores(x, models.selector, models.seen, models.unseen,
                                      models.joint, dataset.catalog)
    labels = np.concatenate([seen_split.labels, unseen_split.labels])
    return _Scored(np.atleast_1d(s), g_s, g_u, g_t, labels, len(seen_split))


def _report(dataset: GzslDataset, scored: _Scored, cfg: FusionConfig) -> EvalReport:
    cat = dataset.catalog
    pred = fuse_scores(scored.s, scored.g_s, scored.g_u, scored.g_t, cfg, cat).prediction
    k = scored.n_seen_points
    seen_acc = per_class_accuracies(pred[:k], scored.labels[:k], cat.seen_ids)
    unseen_acc = per_class_accuracies(pred[k:], scored.labels[k:], cat.unseen_ids)
    acc_s = float(np.mean(list(seen_acc.values())))
    acc_u = float(np.mean(list(unseen_acc.values())))
    n_seen_routed = int(np.sum(scored.s >= 0))
    return EvalReport(
        acc_seen=acc_s,
        acc_unseen=acc_u,
        harmonic=harmonic_mean(acc_s, acc_u),
        per_class={**seen_acc, **unseen_acc},
        n_total=scored.s.shape[0],
        n_routed_seen=n_seen_routed,
        n_routed_unseen=scored.s.shape[0] - n_seen_routed,
    )


def run_gzsl_protocol(dataset: GzslDataset, models: ModelSet, cfg: FusionConfig) -> EvalReport:
    """Fuse over the whole catalog on both test splits.

    Acc_S is the per-class accuracy on ``test_seen`` over the seen classes,
    Acc_U the same on ``test_unseen`` over the unseen classes; a prediction
    from the other side of the catalog counts as a miss.
    """
    if cfg.strategy is Strategy.THREE_WAY and models.joint is None:
        raise ProtocolError("3-way evaluation needs the joint model")
    return _report(dataset, _score_tests(dataset, models), cfg)


# --- cross-validation ---------------------------------------------------------

@dataclass(frozen=True)
class CvResult:
    best_config: FusionConfig
    rows: list = field(default_factory=list)  # (FusionConfig, EvalReport) in grid order

    @property
    def grid(self) -> list[tuple[FusionConfig, float]]:
        return [(cfg, report.harmonic) for cfg, report in self.rows]


def stratified_split(split: Split, val_fraction: float, rng) -> tuple[Split, Split]:
    """Per-class random split into (fit, val); every class must keep a point on each side."""
    fit_idx, val_idx = [], []
    for c in np.unique(split.labels):
        idx = np.flatnonzero(split.labels == c)
        idx = idx[rng.permutation(idx.shape[0])]
        n_val = int(round(val_fraction * idx.shape[0]))
        if n_val == 0 or n_val == idx.shape[0]:
            raise ProtocolError(f"split too small: class {int(c)} cannot be divided "
                                f"with val_fraction={val_fraction}")
        val_idx.append(idx[:n_val])
        fit_idx.append(idx[n_val:])
    fit_idx = np.sort(np.concatenate(fit_idx))
    val_idx = np.sort(np.concatenate(val_idx))
    return (Split(split.features[fit_idx], split.labels[fit_idx]),
            Split(split.features[val_idx], split.labels[val_idx]))


def candidate_configs(strategy: Strategy, grids: dict | None = None,
                      base: FusionConfig | None = None) -> list[FusionConfig]:
    """The symmetric part of the grid for ``strategy``, in evaluation order."""
    strategy = Strategy(strategy)
    grids = grids or {}
    base = replace(base or FusionConfig(), strategy=strategy)
    if strategy is Strategy.TWO_WAY:
        return [base]
    if strategy is Strategy.TWO_WAY_SA:
        return [replace(base, sigma=float(v)) for v in grids.get("sigma", DEFAULT_SIGMAS)]
    cs = grids.get("c", DEFAULT_CS)
    offsets = grids.get("o_s", DEFAULT_OFFSETS)
    return [replace(base, c=float(c), o_s=float(o), o_u=float(o))
            for c, o in itertools.product(cs, offsets)]


def _evaluate_grid(dataset, scored, configs, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda cfg: _report(dataset, scored, cfg), configs))
    return [_report(dataset, scored, cfg) for cfg in configs]


def cross_validate(dataset: GzslDataset, strategy, grids: dict | None = None,
                   val_fraction: float = 0.2, seed: int = 42,
                   hyper: TrainHyper = TrainHyper(), workers: int = 1,
                   base: FusionConfig | None = None) -> CvResult:
    """Pick fusion knobs by validation H on held-out training data.

    ``train_seen`` and ``aux_unseen`` are split per class into fit and
    validation parts; held-out generated points stand in for unseen test data.
    For 3-way fusion the symmetric ``c x (o_s = o_u)`` grid is followed by an
    asymmetric ``o_s x o_u`` pass (grids ``o_s`` and ``o_u``) at the best ``c``.
    Ties go to the earliest grid point.
    """
    if not 0 < val_fraction < 1:
        raise ProtocolError("val_fraction must lie in (0, 1)")
    strategy = Strategy(strategy)
    grids = grids or {}
    for key in {"2way-sa": ("sigma",), "3way": ("c", "o_s", "o_u")}.get(strategy.value, ()):
        if key in grids and len(grids[key]) == 0:
            raise ProtocolError(f"grid {key} is empty")

    rng = np.random.default_rng(seed)
    fit_seen, val_seen = stratified_split(dataset["train_seen"], val_fraction, rng)
    fit_aux, val_aux = stratified_split(dataset["aux_unseen"], val_fraction, rng)
    try:
        fold = GzslDataset(dataset.catalog, dataset.attributes, {
            "train_seen": fit_seen, "aux_unseen": fit_aux,
            "test_seen": val_seen, "test_unseen": val_aux,
        })
    except DatasetError as exc:
        raise ProtocolError(f"split too small: {exc}") from None
    models = train_models(fold, hyper)
    scored = _score_tests(fold, models)

    configs = candidate_configs(strategy, grids, base)
    reports = _evaluate_grid(fold, scored, configs, workers)
    if strategy is Strategy.THREE_WAY:
        best = configs[int(np.argmax([r.harmonic for r in reports]))]
        seen_pairs = {(cfg.c, cfg.o_s, cfg.o_u) for cfg in configs}
        extra = [replace(best, o_s=float(a), o_u=float(b))
                 for a, b in itertools.product(grids.get("o_s", DEFAULT_OFFSETS),
                                               grids.get("o_u", DEFAULT_OFFSETS))
                 if (best.c, float(a), float(b)) not in seen_pairs]
        configs += extra
        reports += _evaluate_grid(fold, scored, extra, workers)

    best_i = int(np.argmax([r.harmonic for r in reports]))  # first max wins ties
    return CvResult(best_config=configs[best_i], rows=list(zip(configs, reports)))


# --- sigma sweep ----------------------------------------------------------------

class SweepRow(NamedTuple):
    sigma: float
    acc_seen: float
    acc_unseen: float
    harmonic: float


def sigma_sweep(dataset: GzslDataset, models: ModelSet, sigmas, raw_mix: bool = False,
                workers: int = 1) -> list[SweepRow]:
    """Soft-assignment protocol run per sigma with the models held fixed."""
    configs = [FusionConfig(Strategy.TWO_WAY_SA, sigma=float(s), raw_mix=raw_mix) for s in sigmas]
    reports = _evaluate_grid(dataset, _score_tests(dataset, models), configs, workers)
    return [SweepRow(cfg.sigma, r.acc_seen, r.acc_unseen, r.harmonic)
            for cfg, r in zip(configs, reports)]


def format_csv(rows) -> str:
    """CSV text for ``(FusionConfig, acc_seen, acc_unseen, harmonic)`` rows.

    Accuracies stay on the [0, 1] scale, 4 decimals.
    """
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for cfg, acc_s, acc_u, h in rows:
        out.write(",".join(f"{v:.4f}" for v in (cfg.sigma, cfg.c, cfg.o_s, cfg.o_u,
                                                acc_s, acc_u, h)) + "\n")
    return out.getvalue()
