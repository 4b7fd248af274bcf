"""Pure numpy implementations of the training kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them loop for
loop. All array arguments are float64 C-contiguous and updated in place where
noted.
"""

import numpy as np


def softmax_ce_grad(W, b, X, y_idx, weight_decay):
    """Mean softmax cross-entropy plus ``weight_decay/2 * ||W||^2``.

    ``W`` is (d, k), ``b`` is (k,), ``X`` is (n, d), ``y_idx`` holds column
    indices into ``W``. Returns ``(loss, grad_W, grad_b)``.
    """
    n = X.shape[0]
    logits = X @ W + b
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    denom = exp.sum(axis=1, keepdims=True)
    rows = np.arange(n)
    loss = float(np.mean(np.log(denom[:, 0]) - logits[rows, y_idx]))
    loss += 0.5 * weight_decay * float(np.sum(W * W))

    delta = exp / denom
    delta[rows, y_idx] -= 1.0
    delta /= n
    grad_W = X.T @ delta + weight_decay * W
    grad_b = delta.sum(axis=0)
    return loss, grad_W, grad_b


def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    """One Adam step at (1-based) step ``t``; ``p``, ``m``, ``v`` in place."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def softmax_adam_epoch(W, b, mW, vW, mb, vb, X, y_idx, order, batch_size,
                       lr, beta1, beta2, eps, weight_decay, t):
    """Run one epoch of mini-batch Adam over ``X[order]``.

    ``t`` is the number of Adam steps taken so far. Returns the new step count
    and the mean batch loss of the epoch.
    """
    n = order.shape[0]
    total = 0.0
    batches = 0
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        loss, gW, gb = softmax_ce_grad(W, b, X[idx], y_idx[idx], weight_decay)
        t += 1
        adam_update(W, gW, mW, vW, t, lr, beta1, beta2, eps)
        adam_update(b, gb, mb, vb, t, lr, beta1, beta2, eps)
        total += loss
        batches += 1
    return t, total / batches


def hinge_descent(X, y, c, lam, iters):
    """Full-batch subgradient descent on the weighted L2-regularized hinge loss.

    Minimizes ``lam/2 ||w||^2 + mean_i c_i max(0, 1 - y_i (w.x_i + b))`` with
    step ``1/(lam t)``; the bias is not regularized. Returns ``(w, b, history)``
    where ``history[t]`` is the objective of the t-th iterate (``history[0]``
    at the zero initialization).
    """
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    history = np.empty(iters + 1)
    cy = c * y
    for t in range(1, iters + 2):
        margins = y * (X @ w + b)
        active = margins < 1.0
        history[t - 1] = 0.5 * lam * (w @ w) + np.sum(c[active] * (1.0 - margins[active])) / n
        if t == iters + 1:
            break
        eta = 1.0 / (lam * t)
        grad_w = lam * w - (cy[active] @ X[active]) / n
        grad_b = -np.sum(cy[active]) / n
        w -= eta * grad_w
        b -= eta * grad_b
    return w, b, history
