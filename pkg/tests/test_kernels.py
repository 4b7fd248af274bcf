import numpy as np
import pytest

from modelsel import kernels
from modelsel.classifiers import TrainHyper, train_selector, train_softmax

try:
    from modelsel import _ckernels  # noqa: F401
    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")


def test_backend_reported():
    assert kernels.BACKEND in ("python", "cython")
    assert kernels.BACKEND == ("cython" if HAVE_EXT else "python") or \
        kernels.BACKEND == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def _epoch_inputs(seed, n=137, d=7, k=4):
    rng = np.random.default_rng(seed)
    W = rng.uniform(-0.5, 0.5, size=(d, k))
    b = rng.normal(size=k)
    X = rng.normal(size=(n, d))
    y = rng.integers(0, k, size=n).astype(np.intp)
    order = rng.permutation(n).astype(np.intp)
    state = [np.zeros_like(W), np.zeros_like(W), np.zeros_like(b), np.zeros_like(b)]
    return W, b, state, X, y, order


@needs_ext
@pytest.mark.parametrize("seed", range(3))
def test_epoch_parity(seed):
    results = []
    for name in ("python", "cython"):
        W, b, (mW, vW, mb, vb), X, y, order = _epoch_inputs(seed)
        impl = kernels.get_backend(name)
        t = 0
        losses = []
        for _ in range(4):
            t, loss = impl.softmax_adam_epoch(W, b, mW, vW, mb, vb, X, y, order, 60,
                                              1e-2, 0.9, 0.99, 1e-8, 1e-3, t)
            losses.append(loss)
        results.append((t, losses, W, b, mW, vW))
    (t0, l0, *arrs0), (t1, l1, *arrs1) = results
    assert t0 == t1 == 4 * 3
    np.testing.assert_allclose(l0, l1, rtol=1e-12)
    for a, c in zip(arrs0, arrs1):
        np.testing.assert_allclose(a, c, rtol=1e-10, atol=1e-13)


@needs_ext
def test_hinge_parity():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(80, 6))
    y = np.where(rng.random(80) < 0.3, 1.0, -1.0)
    c = np.where(y > 0, 80 / (2 * (y > 0).sum()), 80 / (2 * (y < 0).sum()))
    w0, b0, h0 = kernels.get_backend("python").hinge_descent(X, y, c, 1e-2, 300)
    w1, b1, h1 = kernels.get_backend("cython").hinge_descent(X, y, c, 1e-2, 300)
    np.testing.assert_allclose(w0, w1, rtol=1e-9, atol=1e-11)
    assert b0 == pytest.approx(b1, rel=1e-9, abs=1e-11)
    np.testing.assert_allclose(h0, h1, rtol=1e-9)


@needs_ext
def test_training_parity_on_benchmark(benchmark):
    tr = benchmark["train_seen"]
    ids = benchmark.catalog.seen_ids
    a = train_softmax(tr.features, tr.labels, ids, TrainHyper(epochs=5), backend="python")
    b = train_softmax(tr.features, tr.labels, ids, TrainHyper(epochs=5), backend="cython")
    np.testing.assert_allclose(a.weights, b.weights, rtol=1e-9, atol=1e-12)
    s_py = train_selector(tr.features, benchmark["aux_unseen"].features, backend="python")
    s_c = train_selector(tr.features, benchmark["aux_unseen"].features, backend="cython")
    np.testing.assert_allclose(s_py.weight, s_c.weight, rtol=1e-8, atol=1e-10)


def test_short_last_batch_counts_steps():
    W, b, (mW, vW, mb, vb), X, y, order = _epoch_inputs(0, n=61)
    t, _ = kernels.softmax_adam_epoch(W, b, mW, vW, mb, vb, X, y, order, 60,
                                      1e-3, 0.9, 0.99, 1e-8, 0.0, 10)
    assert t == 12
