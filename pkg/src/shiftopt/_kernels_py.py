"""Pure-numpy kernels for the hot inner loops.

Drop-in fallback for the compiled extension module; ``shiftopt._backend``
picks whichever is importable.  All functions operate on contiguous float64
arrays and match the compiled signatures exactly.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "numpy"


def logsumexp(x):
    """log(sum(exp(x))) with max-subtraction for stability."""
    x = np.asarray(x, dtype=np.float64)
    m = float(np.max(x)) if x.size else -math.inf
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.exp(x - m).sum()))


def logsumexp_weighted(log_values, log_widths):
    """log(sum(width_i * exp(log_value_i))) over pieces, in log scale."""
    return logsumexp(np.asarray(log_values) + np.asarray(log_widths))


def share_step(log_values, lam_u, log_widths, alpha, log_mix=None):
    """One exponential-update-plus-mixing step, in place.

    Sets ``log_values <- log((1-alpha) * exp(log_values + lam_u)
    + alpha * N * mix)`` where ``N`` is the integral of the exponentially
    updated density and ``mix`` the (already normalized) mixing density;
    ``log_mix=None`` means the uniform density on [0, 1].  Returns log N.
    """
    e = log_values + lam_u
    norm = logsumexp_weighted(e, log_widths)
    if alpha <= 0.0:
        out = e
    elif alpha >= 1.0:
        out = np.full_like(e, norm) if log_mix is None else norm + log_mix
    else:
        keep = math.log1p(-alpha) + e
        mixed = math.log(alpha) + norm
        if log_mix is not None:
            mixed = mixed + log_mix
        out = np.logaddexp(keep, mixed)
    log_values[:] = out
    return norm


def dp_max_layer(prev, cum):
    """One segment layer of the shifted-optimum recursion.

    ``prev[q]`` is the best payoff over rounds 1..q using j-1 segments
    (-inf where infeasible) and ``cum[t, p]`` the payoff of piece p
    accumulated over rounds 1..t.  Returns ``out`` of the same length as
    ``prev`` with ``out[q] = max over splits r <= q and pieces p of
    (prev[r-1] - cum[r-1, p]) + cum[q, p]``, the best with j segments.
    """
    n_rounds = cum.shape[0] - 1
    val = prev[:n_rounds, None] - cum[:n_rounds, :]
    running = np.maximum.accumulate(val, axis=0)
    out = np.empty(n_rounds + 1)
    out[0] = -np.inf
    out[1:] = (running + cum[1:, :]).max(axis=1)
    return out
