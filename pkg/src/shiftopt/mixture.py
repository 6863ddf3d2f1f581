"""Exact mixture-of-restarts implementation of the fixed share forecaster.

The fixed share sampling density at round t decomposes into a convex
mixture of t restarted exponential-forecaster densities: component i is
proportional to exp(lam * sum of utilities from round i to t-1).  This
module maintains the component normalizers, the mixture coefficients,
and the inter-round normalizers exactly (1-D domain), supports exact
sampling, and exposes its bookkeeping for cross-validation against the
direct density representation.

Conventions: W(i, i) = 1 (an empty utility sum over the unit-volume
domain), the round-1 coefficient row is [1], and all bookkeeping is in
natural-log scale.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import kernels
from .errors import NumericalDriftError, ParameterError
from .piecewise import PiecewiseConstant, _sample_pieces, values_on_grid

__all__ = ["MixtureSampler"]

# Renormalize the coefficient row beyond this drift; abort beyond the hard cap.
DRIFT_RENORMALIZE = 1e-12
DRIFT_ABORT = 1e-9


def _scaled_log(k: int, log_x: float) -> float:
    # k * log_x with the convention 0 * (-inf) = 0.
    if k == 0:
        return 0.0
    return k * log_x


class MixtureSampler:
    """Fixed share as an explicitly maintained mixture of restarted forecasters.

    Per round, ``observe`` folds in the revealed utility, advances the
    normalizer recursion, and refreshes the coefficient row; ``act``
    draws a component by its coefficient and then a point from that
    component's piecewise-exponential density.
    """

    def __init__(self, lam: float, alpha: float):
        if not lam > 0.0:
            raise ParameterError(f"step size must be positive, got {lam}")
        if not 0.0 <= alpha <= 1.0:
            raise ParameterError(f"alpha must be in [0, 1], got {alpha}")
        self.lam = lam
        self.alpha = alpha
        self.t = 1
        self.renormalizations = 0
        self._grid = np.empty(0)
        # Row i-1 holds lam * sum of utilities from round i to the current
        # round (exclusive) on the current grid, i.e. the log of component
        # i's unnormalized density.
        self._accum = np.zeros((1, 1))
        self._log_w = [0.0]            # log W_1..W_t (W_1 = domain volume = 1)
        self._log_c = np.zeros(1)      # log coefficient row for the current round
        self._log_comp_norm = np.zeros(1)  # log W(i, t) for i = 1..t

    # -- bookkeeping access ------------------------------------------------

    @property
    def log_normalizers(self) -> list[float]:
        """log W_1..W_t for the rounds seen so far."""
        return list(self._log_w)

    @property
    def coefficients(self) -> np.ndarray:
        """The current mixture coefficient row (linear scale)."""
        return np.exp(self._log_c)

    @property
    def log_widths(self) -> np.ndarray:
        edges = np.concatenate(([0.0], self._grid, [1.0]))
        return np.log(np.diff(edges))

    def component_log_normalizers(self) -> np.ndarray:
        """log W(i, t) for i = 1..t at the current round."""
        return self._log_comp_norm.copy()

    def diagnostics(self) -> dict:
        return {
            "t": self.t,
            "log_W": [float(x) for x in self._log_w],
            "coefficients": [float(x) for x in self.coefficients],
            "coefficient_sum": float(np.exp(kernels.logsumexp(self._log_c))),
            "renormalizations": self.renormalizations,
        }

    # -- core recursions -----------------------------------------------------

    def observe(self, u: PiecewiseConstant) -> None:
        """Fold in round t's utility and advance to round t+1."""
        t = self.t
        if u.breakpoints.size:
            grid = np.union1d(self._grid, u.breakpoints)
            if grid.size != self._grid.size:
                left = np.concatenate(([0.0], grid))
                idx = np.searchsorted(self._grid, left, side="right")
                self._accum = self._accum[:, idx]
                self._grid = grid
        lam_u = self.lam * values_on_grid(u, self._grid)

        # Components 1..t absorb u_t; component t+1 starts fresh.
        self._accum += lam_u[None, :]
        self._accum = np.vstack([self._accum, np.zeros_like(lam_u)])

        # log W(i, t+1) for i = 1..t.
        log_w_next = self._log_row_integrals(self._accum[:t])

        log_w_new = self._normalizer_step(log_w_next)
        self._log_w.append(log_w_new)
        self._coefficient_step(log_w_new, log_w_next)

        self._log_comp_norm = np.concatenate([log_w_next, [0.0]])
        self.t = t + 1

    def _log_row_integrals(self, rows: np.ndarray) -> np.ndarray:
        x = rows + self.log_widths[None, :]
        m = x.max(axis=1)
        return m + np.log(np.exp(x - m[:, None]).sum(axis=1))

    def _normalizer_step(self, log_w_next: np.ndarray) -> float:
        """log W_{t+1} from W_1..W_t and the component normalizers W(i, t+1):

        W_{t+1} = (1-a)^(t-1) W(1, t+1)
                  + a * sum_{i=2..t} (1-a)^(t-i) W_i W(i, t+1)
        """
        t = self.t
        log_a = math.log(self.alpha) if self.alpha > 0.0 else -math.inf
        log_1a = math.log1p(-self.alpha) if self.alpha < 1.0 else -math.inf
        terms = np.empty(t)
        terms[0] = _scaled_log(t - 1, log_1a) + log_w_next[0]
        for i in range(2, t + 1):
            terms[i - 1] = (log_a + _scaled_log(t - i, log_1a)
                            + self._log_w[i - 1] + log_w_next[i - 1])
        return float(kernels.logsumexp(terms))

    def _coefficient_step(self, log_w_new: float, log_w_next: np.ndarray) -> None:
        """Coefficient row for round t+1:

        C_{t+1, t+1} = a,
        C_{t+1, i}   = (1-a) (W_t / W_{t+1}) (W(i, t+1) / W(i, t)) C_{t, i}.
        """
        t = self.t
        log_a = math.log(self.alpha) if self.alpha > 0.0 else -math.inf
        log_1a = math.log1p(-self.alpha) if self.alpha < 1.0 else -math.inf
        new_row = np.empty(t + 1)
        new_row[:t] = (log_1a + self._log_w[t - 1] - log_w_new
                       + log_w_next - self._log_comp_norm[:t] + self._log_c)
        new_row[t] = log_a
        total = kernels.logsumexp(new_row)
        drift = abs(math.expm1(total))
        if drift > DRIFT_ABORT:
            raise NumericalDriftError(
                f"coefficient row sum drifted to {math.exp(total)} at round {t + 1}"
            )
        if drift > DRIFT_RENORMALIZE:
            new_row -= total
            self.renormalizations += 1
        self._log_c = new_row

    # -- sampling and verification surfaces ----------------------------------

    def act(self, rng: np.random.Generator) -> float:
        """Draw a component by coefficient, then a point from its density."""
        cum = np.cumsum(self.coefficients)
        idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        idx = min(idx, self.t - 1)
        row = self._accum[idx]
        return _sample_pieces(self._grid, row, self.log_widths, rng)

    def density(self) -> PiecewiseConstant:
        """The mixture sampling density as a step function (for verification)."""
        comps = np.exp(self._accum[:self.t] - self._log_comp_norm[:, None])
        vals = (self.coefficients[:, None] * comps).sum(axis=0)
        return PiecewiseConstant(self._grid, vals)

    def log_w_tilde(self, i: int, j: int) -> float:
        """log W(i, j) for the current round j = t (1-based start index i)."""
        if not 1 <= i <= self.t:
            raise ParameterError(f"component index {i} out of range 1..{self.t}")
        if j != self.t:
            raise ParameterError("only the current round's normalizers are cached")
        return float(self._log_comp_norm[i - 1])
