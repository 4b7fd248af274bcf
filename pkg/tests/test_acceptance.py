"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (``pytest tests/test_acceptance.py -s`` to see the lines) or
directly with ``python3 tests/test_acceptance.py`` for the summary alone.
"""

import contextlib
import io
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (brute_force_per_class, finite_difference, first_argmax,  # noqa: E402
                     max_relative_error, naive_ce_loss)
from table1 import cells  # noqa: E402

from modelsel import cli  # noqa: E402
from modelsel.classifiers import (AdamState, LinearModel, TrainHyper, adam_step,  # noqa: E402
                                  selector_score, softmax_ce_loss_grad, train_models,
                                  train_selector)
from modelsel.dataset import ClassCatalog, make_synthetic_benchmark  # noqa: E402
from modelsel.evaluation import (cross_validate, harmonic_mean, per_class_top1,  # noqa: E402
                                 run_gzsl_protocol, sigma_sweep)
from modelsel.fusion import (FusionConfig, Strategy, compute_scores, fuse_2way,  # noqa: E402
                             fuse_2way_sa, fuse_3way, sigmoid_domain_prob)

INF = math.inf


def report(number, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    return ok


# 1 ---------------------------------------------------------------------------

def check_harmonic_table():
    start = time.perf_counter()
    misses = []
    total = 0
    for method, dataset, (ts, tr, h) in cells():
        total += 1
        got = 100 * harmonic_mean(ts / 100, tr / 100)
        if abs(got - h) > 0.05:
            misses.append(f"{method}/{dataset} {got:.2f} vs {h}")
    elapsed = time.perf_counter() - start
    ok = not misses and elapsed < 1.0
    detail = f"{total - len(misses)}/{total} cells within 0.05 in {elapsed:.3f}s"
    if misses:
        detail += "; off: " + ", ".join(misses)
    return ok, detail


# 2 ---------------------------------------------------------------------------

def check_gradients(instances=20, seed=2024):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        d, k, n = int(rng.integers(1, 11)), int(rng.integers(2, 6)), int(rng.integers(1, 13))
        W, b = rng.normal(size=(d, k)), rng.normal(size=k)
        X = rng.normal(size=(n, d))
        y = rng.integers(0, k, size=n)
        wd = float(rng.uniform(0, 0.1))
        model = LinearModel(tuple(range(k)), W, b)
        _, gW, gb = softmax_ce_loss_grad(model, X, y, wd)

        def loss():
            return naive_ce_loss(W.tolist(), b.tolist(), X.tolist(), y.tolist(), wd)

        worst = max(worst, max_relative_error(gW, finite_difference(loss, W)),
                    max_relative_error(gb, finite_difference(loss, b)))
    return worst < 1e-5, f"max relative error {worst:.2e} over {instances} instances"


# 3 ---------------------------------------------------------------------------

def check_adam_step(seed=7):
    rng = np.random.default_rng(seed)
    hyper = TrainHyper()
    worst = 0.0
    for g in np.concatenate([rng.normal(size=50), rng.normal(size=50) * 1e-6, [1e3, -1e-9]]):
        p0 = float(rng.normal())
        _, (p1,) = adam_step(AdamState.zeros_like([np.array(p0)]), [np.array(p0)],
                             [np.array(g)], hyper)
        expected = -hyper.learning_rate * g / (abs(g) + hyper.adam_eps)
        worst = max(worst, abs((float(p1) - p0) - expected))
    _, (p_zero,) = adam_step(AdamState.zeros_like([np.array(0.7)]), [np.array(0.7)],
                             [np.array(0.0)], hyper)
    ok = worst <= 1e-12 and float(p_zero) == 0.7
    return ok, f"max deviation {worst:.1e}; zero gradient update {float(p_zero) - 0.7:.1e}"


# 4 ---------------------------------------------------------------------------

def check_selector(seed=11):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0.5, 3.0, size=(40, 1))
    neg = rng.uniform(-3.0, -0.5, size=(25, 1))
    both = np.concatenate([pos, neg])
    sel = train_selector(pos, neg)
    s = selector_score(sel, both)
    truth = np.concatenate([np.ones(40), -np.ones(25)])
    acc = float(np.mean(np.where(s >= 0, 1.0, -1.0) == truth))
    swapped = selector_score(train_selector(neg, pos), both)
    antisym = bool(np.all(np.sign(swapped) == -np.sign(s)) and np.all(s != 0))
    return acc == 1.0 and antisym, f"training accuracy {acc:.0%}; swap anti-symmetry {antisym}"


# 5, 6 --------------------------------------------------------------------------

BASELINE = FusionConfig(Strategy.THREE_WAY, c=0.0, o_s=INF, o_u=INF)


def check_collapse():
    ds = make_synthetic_benchmark(seed=42)
    r = run_gzsl_protocol(ds, train_models(ds, joint_uses_aux=False), BASELINE)
    ok = r.acc_unseen == 0.0 and r.harmonic == 0.0
    return ok, (f"seen-only baseline ts={100 * r.acc_unseen:.1f} tr={100 * r.acc_seen:.1f} "
                f"H={100 * r.harmonic:.1f}")


def check_fusion_benefit():
    start = time.perf_counter()
    ds = make_synthetic_benchmark(seed=42)
    models = train_models(ds)
    configs = {
        "2way": FusionConfig(Strategy.TWO_WAY),
        "2way-sa": cross_validate(ds, Strategy.TWO_WAY_SA).best_config,
        "3way": cross_validate(ds, Strategy.THREE_WAY).best_config,
    }
    hs = {name: run_gzsl_protocol(ds, models, cfg).harmonic for name, cfg in configs.items()}
    base = run_gzsl_protocol(ds, train_models(ds, joint_uses_aux=False), BASELINE).harmonic
    elapsed = time.perf_counter() - start
    ok = all(h >= 0.40 for h in hs.values()) and base == 0.0 and elapsed < 60
    parts = ", ".join(f"{k} H={v:.3f}" for k, v in hs.items())
    return ok, f"{parts}, baseline H={base:.3f}, {elapsed:.1f}s"


# 7 ---------------------------------------------------------------------------

def check_soft_to_hard():
    ds = make_synthetic_benchmark(seed=42)
    models = train_models(ds)
    x = np.concatenate([ds["test_seen"].features, ds["test_unseen"].features])
    s, g_s, g_u, _ = compute_scores(x, models.selector, models.seen, models.unseen, None,
                                    ds.catalog)
    hard = fuse_2way(s, g_s, g_u, ds.catalog).prediction
    soft = fuse_2way_sa(sigmoid_domain_prob(s, 1e6), g_s, g_u, ds.catalog).prediction
    keep = np.abs(s) > 1e-3
    agree = float(np.mean(hard[keep] == soft[keep]))
    return agree >= 0.99, f"agreement {agree:.2%} on {int(keep.sum())} points"


# 8 ---------------------------------------------------------------------------

def check_three_way(trials=1000, seed=3):
    rng = np.random.default_rng(seed)
    dominated = exact = True
    for _ in range(trials):
        n_s, n_u = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        cat = ClassCatalog(range(n_s), range(n_s, n_s + n_u))
        s = float(rng.normal())
        g_s, g_u = rng.normal(size=n_s) * 3, rng.normal(size=n_u) * 3
        g_t = rng.normal(size=n_s + n_u) * 3
        cfg = FusionConfig(Strategy.THREE_WAY, c=float(rng.uniform(0, 2)),
                           o_s=float(rng.normal()), o_u=float(rng.normal()))
        dominated &= bool(np.all(fuse_3way(s, g_s, g_u, g_t, cfg, cat).values >= g_t))
        degenerate = FusionConfig(Strategy.THREE_WAY, c=0.0, o_s=INF, o_u=INF)
        pred = fuse_3way(s, g_s, g_u, g_t, degenerate, cat).prediction
        exact &= int(pred) == cat.all_ids[first_argmax(g_t.tolist())]
    return dominated and exact, f"dominance {dominated}; c=0, o=inf equals argmax g_t {exact}"


# 9 ---------------------------------------------------------------------------

def check_per_class(instances=100, seed=5):
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(instances):
        k = int(rng.integers(1, 7))
        classes = list(range(k))
        labels = np.concatenate([classes, rng.integers(0, k, size=int(rng.integers(0, 30)))])
        rng.shuffle(labels)
        preds = rng.integers(0, k + 2, size=labels.shape[0])
        expected = brute_force_per_class(preds.tolist(), labels.tolist(), classes)
        mismatches += per_class_top1(preds, labels, classes) != expected
    return mismatches == 0, f"{instances - mismatches}/{instances} instances match exactly"


# 10 --------------------------------------------------------------------------

def _cli_run(root: Path):
    out = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(io.StringIO()):
        codes = [
            cli.main(["gen-synth", "--seed", "42", "-o", str(root / "d.gzsl")]),
            cli.main(["train", str(root / "d.gzsl"), "-o", str(root / "m"), "--seed", "42"]),
            cli.main(["eval", str(root / "d.gzsl"), "-m", str(root / "m"),
                      "--strategy", "2way-sa", "--sigma", "0.3"]),
        ]
    files = {p.name: p.read_bytes() for p in sorted((root / "m").glob("*.msel"))}
    return codes, files, out.getvalue().splitlines()[-1]


def check_determinism():
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        codes_a, files_a, line_a = _cli_run(Path(a))
        codes_b, files_b, line_b = _cli_run(Path(b))
    ok = codes_a == codes_b == [0, 0, 0] and len(files_a) == 4 and files_a == files_b \
        and line_a == line_b
    return ok, f"{len(files_a)} model files identical {files_a == files_b}; metrics '{line_a}'"


# 11 --------------------------------------------------------------------------

SWEEP_SIGMAS = (1e-3, 1e-2, 0.1, 0.3, 1.0, 10.0, 100.0, 1e3, 1e6)


def check_sigma_sweep():
    ds = make_synthetic_benchmark(seed=42)
    rows = sigma_sweep(ds, train_models(ds), SWEEP_SIGMAS)
    best = int(np.argmax([r.harmonic for r in rows]))
    ok = 0 < best < len(rows) - 1
    return ok, f"best sigma {rows[best].sigma:g} (H={rows[best].harmonic:.4f}) at position " \
               f"{best + 1} of {len(rows)}"


CHECKS = [
    (1, check_harmonic_table),
    (2, check_gradients),
    (3, check_adam_step),
    (4, check_selector),
    (5, check_collapse),
    (6, check_fusion_benefit),
    (7, check_soft_to_hard),
    (8, check_three_way),
    (9, check_per_class),
    (10, check_determinism),
    (11, check_sigma_sweep),
]


@pytest.mark.parametrize("number,check", CHECKS, ids=[f"criterion_{n}" for n, _ in CHECKS])
def test_criterion(number, check):
    ok, detail = check()
    assert report(number, ok, detail), detail


if __name__ == "__main__":
    results = [report(n, *check()) for n, check in CHECKS]
    print(f"{sum(results)}/{len(results)} criteria pass")
    sys.exit(0 if all(results) else 1)
