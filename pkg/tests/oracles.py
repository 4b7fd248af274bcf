"""Naive reference computations used as independent test oracles."""

import math

import numpy as np


def naive_scores(weights, bias, x):
    d, k = len(weights), len(bias)
    return [sum(weights[i][j] * x[i] for i in range(d)) + bias[j] for j in range(k)]


def naive_ce_loss(weights, bias, features, y_idx, weight_decay):
    total = 0.0
    for x, y in zip(features, y_idx):
        z = naive_scores(weights, bias, x)
        top = max(z)
        log_norm = top + math.log(sum(math.exp(v - top) for v in z))
        total += log_norm - z[y]
    reg = sum(w * w for row in weights for w in row)
    return total / len(features) + 0.5 * weight_decay * reg


def finite_difference(f, params, h=1e-5):
    """Central differences of scalar ``f`` w.r.t. every entry of ``params`` (in place)."""
    grad = np.zeros_like(params)
    it = np.nditer(params, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        keep = params[idx]
        params[idx] = keep + h
        up = f()
        params[idx] = keep - h
        down = f()
        params[idx] = keep
        grad[idx] = (up - down) / (2 * h)
    return grad


def max_relative_error(analytic, numeric):
    analytic, numeric = np.ravel(analytic), np.ravel(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def brute_force_3way(s, g_s, g_u, g_t, c, o_s, o_u, n_seen):
    """Direct elementwise evaluation of the 3-way rule on python floats."""
    out = []
    for j, t in enumerate(g_t):
        in_seen = j < n_seen
        if s >= 0 and in_seen:
            cand = c * t + g_s[j] - o_s
        elif s < 0 and not in_seen:
            cand = c * t + g_u[j - n_seen] - o_u
        else:
            cand = -math.inf
        out.append(max(cand, t))
    return out


def first_argmax(values):
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


def brute_force_per_class(predictions, labels, classes):
    hits, counts = {}, {}
    for p, y in zip(predictions, labels):
        counts[y] = counts.get(y, 0) + 1
        hits[y] = hits.get(y, 0) + (p == y)
    return sum(hits[c] / counts[c] for c in classes) / len(classes)
