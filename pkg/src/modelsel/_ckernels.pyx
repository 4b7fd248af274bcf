# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, pow

cnp.import_array()


cdef void _adam(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                double bc1, double bc2, double lr, double beta1, double beta2,
                double eps) noexcept nogil:
    cdef Py_ssize_t i
    cdef double gi
    for i in range(p.shape[0]):
        gi = g[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi
        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi
        p[i] -= lr * (m[i] / bc1) / (sqrt(v[i] / bc2) + eps)


def softmax_adam_epoch(double[:, ::1] W, double[::1] b,
                       double[:, ::1] mW, double[:, ::1] vW,
                       double[::1] mb, double[::1] vb,
                       double[:, ::1] X, cnp.intp_t[::1] y_idx,
                       cnp.intp_t[::1] order, Py_ssize_t batch_size,
                       double lr, double beta1, double beta2, double eps,
                       double weight_decay, long t):
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t d = W.shape[0]
    cdef Py_ssize_t k = W.shape[1]
    cdef double[:, ::1] prob = np.empty((batch_size, k))
    cdef double[:, ::1] gW = np.empty((d, k))
    cdef double[::1] gb = np.empty(k)
    cdef double[::1] W_flat = np.asarray(W).reshape(-1)
    cdef double[::1] gW_flat = np.asarray(gW).reshape(-1)
    cdef double[::1] mW_flat = np.asarray(mW).reshape(-1)
    cdef double[::1] vW_flat = np.asarray(vW).reshape(-1)
    cdef Py_ssize_t start, bs, r, i, j, row
    cdef double mx, z, zy, s, loss, reg, total = 0.0, bc1, bc2
    cdef long batches = 0

    with nogil:
        start = 0
        while start < n:
            bs = min(batch_size, n - start)
            loss = 0.0
            for r in range(bs):
                row = order[start + r]
                mx = -1e308
                for j in range(k):
                    z = b[j]
                    for i in range(d):
                        z = z + X[row, i] * W[i, j]
                    prob[r, j] = z
                    if z > mx:
                        mx = z
                zy = prob[r, y_idx[row]] - mx
                s = 0.0
                for j in range(k):
                    prob[r, j] = exp(prob[r, j] - mx)
                    s = s + prob[r, j]
                loss = loss + log(s) - zy
                for j in range(k):
                    prob[r, j] = prob[r, j] / s
                prob[r, y_idx[row]] -= 1.0
                for j in range(k):
                    prob[r, j] = prob[r, j] / bs

            reg = 0.0
            for i in range(d):
                for j in range(k):
                    reg = reg + W[i, j] * W[i, j]
                    gW[i, j] = weight_decay * W[i, j]
            for j in range(k):
                gb[j] = 0.0
            for r in range(bs):
                row = order[start + r]
                for j in range(k):
                    gb[j] += prob[r, j]
                    for i in range(d):
                        gW[i, j] += X[row, i] * prob[r, j]

            t = t + 1
            bc1 = 1.0 - pow(beta1, <double>t)
            bc2 = 1.0 - pow(beta2, <double>t)
            _adam(W_flat, gW_flat, mW_flat, vW_flat, bc1, bc2, lr, beta1, beta2, eps)
            _adam(b, gb, mb, vb, bc1, bc2, lr, beta1, beta2, eps)
            total = total + loss / bs + 0.5 * weight_decay * reg
            batches = batches + 1
            start = start + batch_size
    return t, total / batches


def hinge_descent(double[:, ::1] X, double[::1] y, double[::1] c,
                  double lam, Py_ssize_t iters):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    w_arr = np.zeros(d)
    history_arr = np.empty(iters + 1)
    cdef double[::1] w = w_arr
    cdef double[::1] history = history_arr
    cdef double[::1] gw = np.empty(d)
    cdef double b = 0.0, margin, hinge, gb, eta, ww, coef
    cdef Py_ssize_t t, r, i

    with nogil:
        for t in range(1, iters + 2):
            for i in range(d):
                gw[i] = 0.0
            gb = 0.0
            hinge = 0.0
            for r in range(n):
                margin = b
                for i in range(d):
                    margin = margin + X[r, i] * w[i]
                margin = y[r] * margin
                if margin < 1.0:
                    hinge = hinge + c[r] * (1.0 - margin)
                    coef = c[r] * y[r]
                    gb = gb + coef
                    for i in range(d):
                        gw[i] += coef * X[r, i]
            ww = 0.0
            for i in range(d):
                ww = ww + w[i] * w[i]
            history[t - 1] = 0.5 * lam * ww + hinge / n
            if t == iters + 1:
                break
            eta = 1.0 / (lam * t)
            for i in range(d):
                w[i] -= eta * (lam * w[i] - gw[i] / n)
            b = b + eta * gb / n
    return w_arr, b, history_arr
