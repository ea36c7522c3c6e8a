"""Pure-Python policy kernels.

Reference implementation of the hot inner-loop math: softmax over act
weights, categorical sampling from a single uniform draw, and the
sequence-driven weight adaptation step. The compiled twin in
``_native.pyx`` performs the same IEEE-754 operations in the same order,
so both backends produce bit-identical results; keep loop order and
arithmetic in sync when editing either file.
"""

from __future__ import annotations

import math

import numpy as np


def softmax(weights: np.ndarray) -> np.ndarray:
    """Softmax with max-subtraction so extreme weights cannot overflow."""
    w = weights.tolist()
    n = len(w)
    m = w[0]
    for i in range(1, n):
        if w[i] > m:
            m = w[i]
    out = [0.0] * n
    s = 0.0
    for i in range(n):
        out[i] = math.exp(w[i] - m)
        s += out[i]
    for i in range(n):
        out[i] = out[i] / s
    return np.array(out, dtype=np.float64)


def sample_index(weights: np.ndarray, u: float) -> int:
    """Map one uniform draw u in [0, 1) to an index via the softmax CDF."""
    w = weights.tolist()
    n = len(w)
    m = w[0]
    for i in range(1, n):
        if w[i] > m:
            m = w[i]
    e = [0.0] * n
    s = 0.0
    for i in range(n):
        e[i] = math.exp(w[i] - m)
        s += e[i]
    target = u * s
    acc = 0.0
    for i in range(n):
        acc += e[i]
        if target < acc:
            return i
    return n - 1


def adapt_weights(
    weights: np.ndarray,
    sequence: np.ndarray,
    alpha: float,
    from_updated: bool,
    clamp: float,
) -> np.ndarray:
    """Shift weight mass toward the acts of a winning sequence.

    For every step: subtract alpha * P(a') from each act, then add alpha to
    the step's chosen act. Probabilities come from the incoming weights; with
    ``from_updated`` they are recomputed from the evolving vector instead.
    Weights are clamped to [-clamp, clamp] before returning (clamp <= 0
    disables clamping).
    """
    w = weights.tolist()
    seq = sequence.tolist()
    n = len(w)
    out = list(w)
    if not from_updated:
        m = w[0]
        for i in range(1, n):
            if w[i] > m:
                m = w[i]
        e = [0.0] * n
        s = 0.0
        for i in range(n):
            e[i] = math.exp(w[i] - m)
            s += e[i]
        for a in seq:
            for i in range(n):
                out[i] -= alpha * (e[i] / s)
            out[a] += alpha
    else:
        for a in seq:
            m = out[0]
            for i in range(1, n):
                if out[i] > m:
                    m = out[i]
            e = [0.0] * n
            s = 0.0
            for i in range(n):
                e[i] = math.exp(out[i] - m)
                s += e[i]
            for i in range(n):
                out[i] -= alpha * (e[i] / s)
            out[a] += alpha
    if clamp > 0.0:
        for i in range(n):
            if out[i] > clamp:
                out[i] = clamp
            elif out[i] < -clamp:
                out[i] = -clamp
    return np.array(out, dtype=np.float64)
