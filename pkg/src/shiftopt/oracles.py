"""Offline baselines and regret accounting for utility streams.

The offline optima are computed exactly: for piecewise-constant
utilities the best point of any round interval is attained on the merged
piece grid, so dynamic programs over (rounds x segments x pieces)
recover the shifted, sparse-shifted, and adaptive baselines without
discretization error.

All round indices in the public API are 1-based.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import BudgetError, ParameterError
from .piecewise import PiecewiseConstant, merge_breakpoints, values_on_grid

__all__ = [
    "StreamTable",
    "interval_best",
    "shifted_opt",
    "sparse_shifted_opt",
    "adaptive_regret",
    "expected_payoff",
    "top_decile_recurrence",
    "ShiftedOptimum",
    "RegretReport",
    "build_regret_report",
]


def stream_functions(stream) -> list[PiecewiseConstant]:
    """Accept either a UtilityStream-like object or a plain sequence."""
    fns = getattr(stream, "functions", stream)
    return list(fns)


class StreamTable:
    """Global merged grid with per-round piece payoffs and prefix sums.

    cum[t, p] is the payoff of piece p accumulated over rounds 1..t
    (sequential summation, so interval sums are exact prefix differences).
    """

    def __init__(self, functions):
        functions = stream_functions(functions)
        if not functions:
            raise ParameterError("stream must contain at least one function")
        self.n_rounds = len(functions)
        self.breakpoints = merge_breakpoints(functions)
        self.edges = np.concatenate(([0.0], self.breakpoints, [1.0]))
        self.widths = np.diff(self.edges)
        self.midpoints = 0.5 * (self.edges[:-1] + self.edges[1:])
        self.per_round = np.stack([values_on_grid(f, self.breakpoints) for f in functions])
        self.cum = np.zeros((self.n_rounds + 1, self.midpoints.size))
        np.cumsum(self.per_round, axis=0, out=self.cum[1:])

    def interval_sums(self, r: int, q: int) -> np.ndarray:
        """Per-piece payoff of rounds r..q (inclusive, 1-based)."""
        if not 1 <= r <= q <= self.n_rounds:
            raise ParameterError(f"need 1 <= r <= q <= {self.n_rounds}, got r={r}, q={q}")
        return self.cum[q] - self.cum[r - 1]


def interval_best(stream, r: int, q: int):
    """Best single point for rounds r..q: (payoff, representative point).

    The representative is the midpoint of the leftmost maximizing piece.
    """
    table = stream if isinstance(stream, StreamTable) else StreamTable(stream)
    sums = table.interval_sums(r, q)
    idx = int(np.argmax(sums))
    return float(sums[idx]), float(table.midpoints[idx])


@dataclass
class ShiftedOptimum:
    """An offline segmented optimum: value, shift times, and experts.

    shift_times lists t_1 < ... < t_{s-1} (the first round of each new
    segment); experts lists one representative point per segment;
    prefix[q-1] is the optimum restricted to rounds 1..q.
    """

    value: float
    shift_times: list[int]
    experts: list[float]
    prefix: np.ndarray
    expert_pool: list[float] | None = None

    @property
    def segments(self) -> int:
        return len(self.experts)

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "shift_times": list(self.shift_times),
            "experts": list(self.experts),
        }
        if self.expert_pool is not None:
            out["expert_pool"] = list(self.expert_pool)
        return out


def _dp_rows(cum: np.ndarray, segments: int) -> list[np.ndarray]:
    """rows[j][q] = best payoff of rounds 1..q with exactly j nonempty segments."""
    n_rounds = cum.shape[0] - 1
    base = np.full(n_rounds + 1, -np.inf)
    base[0] = 0.0
    rows = [base]
    for _ in range(segments):
        rows.append(np.asarray(kernels.dp_max_layer(rows[-1], cum)))
    return rows


def _reconstruct(cum: np.ndarray, mids: np.ndarray, segments: int,
                 rows: list[np.ndarray]):
    """Recover shift times and experts from forward and suffix layer values.

    Among optimal segmentations the earliest shift times are preferred,
    then the leftmost maximizing piece per segment.
    """
    n_rounds = cum.shape[0] - 1
    rev_cum = np.zeros_like(cum)
    np.cumsum(cum[::-1][:-1] - cum[::-1][1:], axis=0, out=rev_cum[1:])
    rev_rows = _dp_rows(rev_cum, segments)

    shift_times: list[int] = []
    experts: list[float] = []
    start = 1
    for i in range(1, segments + 1):
        if i < segments:
            # Candidate first rounds of segment i+1.
            taus = np.arange(start + 1, n_rounds - (segments - i) + 2)
            cand = rows[i][taus - 1] + rev_rows[segments - i][n_rounds - taus + 1]
            tau = int(taus[int(np.argmax(cand))])
        else:
            tau = n_rounds + 1
        seg = cum[tau - 1] - cum[start - 1]
        experts.append(float(mids[int(np.argmax(seg))]))
        if i < segments:
            shift_times.append(tau)
        start = tau
    return shift_times, experts


def shifted_opt(stream, s: int) -> ShiftedOptimum:
    """Best offline payoff using at most s segments (s-1 expert switches).

    Segments are nonempty but may repeat experts, so fewer effective
    shifts are always admissible.  Ties resolve to the earliest shift
    times, then the leftmost piece.
    """
    table = stream if isinstance(stream, StreamTable) else StreamTable(stream)
    if not 1 <= s <= table.n_rounds:
        raise ParameterError(f"need 1 <= s <= T={table.n_rounds}, got s={s}")
    rows = _dp_rows(table.cum, s)
    stacked = np.stack(rows[1:])
    prefix = stacked.max(axis=0)[1:]
    shift_times, experts = _reconstruct(table.cum, table.midpoints, s, rows)
    return ShiftedOptimum(float(rows[s][table.n_rounds]), shift_times, experts, prefix)


def sparse_shifted_opt(stream, s: int, m: int, subset_budget: int = 10**6) -> ShiftedOptimum:
    """Best s-segment offline payoff using at most m distinct experts.

    Candidate experts are the merged-piece midpoints; every m-subset is
    scanned with the segment recursion restricted to it.  Raises
    BudgetError when the subset count exceeds ``subset_budget`` -- shrink
    the instance or raise the budget explicitly.
    """
    table = stream if isinstance(stream, StreamTable) else StreamTable(stream)
    if not 1 <= m <= s <= table.n_rounds:
        raise ParameterError(f"need 1 <= m <= s <= T, got m={m}, s={s}, T={table.n_rounds}")
    n_pieces = table.midpoints.size
    if m >= min(s, n_pieces):
        full = shifted_opt(table, s)
        full.expert_pool = sorted(set(full.experts))
        return full

    n_subsets = math.comb(n_pieces, m)
    if n_subsets > subset_budget:
        raise BudgetError(
            f"{n_subsets} candidate subsets exceed the budget of {subset_budget}; "
            "reduce m, the number of pieces, or raise subset_budget"
        )

    best_value = -np.inf
    best_subset: tuple[int, ...] | None = None
    for subset in itertools.combinations(range(n_pieces), m):
        sub_cum = np.ascontiguousarray(table.cum[:, subset])
        value = float(_dp_rows(sub_cum, s)[s][table.n_rounds])
        if value > best_value:
            best_value = value
            best_subset = subset

    sub_cum = np.ascontiguousarray(table.cum[:, best_subset])
    sub_mids = table.midpoints[list(best_subset)]
    rows = _dp_rows(sub_cum, s)
    stacked = np.stack(rows[1:])
    prefix = stacked.max(axis=0)[1:]
    shift_times, experts = _reconstruct(sub_cum, sub_mids, s, rows)
    return ShiftedOptimum(best_value, shift_times, experts, prefix,
                          expert_pool=[float(x) for x in sub_mids])


def adaptive_regret(stream, per_round_payoff, tau: int) -> float:
    """Worst regret against the best fixed point over intervals of span <= tau.

    Scans all 1 <= r <= q <= T with q - r <= tau and returns
    max(interval_best(r, q) - sum of the player's payoffs over r..q).
    """
    table = stream if isinstance(stream, StreamTable) else StreamTable(stream)
    if not tau >= 1:
        raise ParameterError(f"need tau >= 1, got {tau}")
    payoff = np.asarray(per_round_payoff, dtype=np.float64)
    if payoff.size != table.n_rounds:
        raise ParameterError("payoff trajectory length must match the stream")
    cum_pay = np.concatenate(([0.0], np.cumsum(payoff)))
    worst = -np.inf
    for r in range(1, table.n_rounds + 1):
        q_hi = min(table.n_rounds, r + tau)
        seg_best = (table.cum[r:q_hi + 1] - table.cum[r - 1]).max(axis=1)
        gaps = seg_best - (cum_pay[r:q_hi + 1] - cum_pay[r - 1])
        worst = max(worst, float(gaps.max()))
    return worst


def expected_payoff(density: PiecewiseConstant, u: PiecewiseConstant) -> float:
    """Exact integral of a normalized density against a utility."""
    grid = merge_breakpoints([density, u])
    p = values_on_grid(density, grid)
    vals = values_on_grid(u, grid)
    widths = np.diff(np.concatenate(([0.0], grid, [1.0])))
    return float(np.sum(widths * p * vals))


def top_decile_recurrence(densities, decile: float = 0.1):
    """Recurrence counts of high-density pieces across rounds.

    For each density, marks the smallest set of highest-density pieces
    covering at least ``decile`` of the domain length (ties resolve to
    the leftmost pieces) and accumulates per-piece counts on the global
    merged grid.  Returns (breakpoints, counts).
    """
    densities = list(densities)
    if not densities:
        raise ParameterError("need at least one density")
    if not 0.0 < decile <= 1.0:
        raise ParameterError(f"decile must be in (0, 1], got {decile}")
    grid = merge_breakpoints(densities)
    widths = np.diff(np.concatenate(([0.0], grid, [1.0])))
    counts = np.zeros(widths.size, dtype=np.int64)
    for p in densities:
        vals = values_on_grid(p, grid)
        order = np.argsort(-vals, kind="stable")
        covered = np.cumsum(widths[order])
        k = int(np.searchsorted(covered, decile - 1e-12)) + 1
        counts[order[:k]] += 1
    return grid, counts


@dataclass
class RegretReport:
    """Per-round payoffs with the offline baselines and derived curves."""

    expected: np.ndarray
    realized: np.ndarray | None
    shifted: ShiftedOptimum
    s: int
    sparse: ShiftedOptimum | None = None
    m: int | None = None
    adaptive: float | None = None
    tau: int | None = None
    payoff_accounting: str = "expected"

    @property
    def n_rounds(self) -> int:
        return self.expected.size

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.expected)

    @property
    def final_regret(self) -> float:
        return self.shifted.value - float(self.cumulative[-1])

    @property
    def average_regret(self) -> np.ndarray:
        t = np.arange(1, self.n_rounds + 1)
        return (self.shifted.prefix - self.cumulative) / t

    @property
    def final_sparse_regret(self) -> float | None:
        if self.sparse is None:
            return None
        return self.sparse.value - float(self.cumulative[-1])

    def to_dict(self) -> dict:
        out = {
            "payoff_accounting": self.payoff_accounting,
            "expected_payoff": self.expected.tolist(),
            "opt_shifted": self.shifted.to_dict(),
            "s": self.s,
            "final_regret": self.final_regret,
            "final_average_regret": self.final_regret / self.n_rounds,
        }
        if self.realized is not None:
            out["realized_payoff"] = self.realized.tolist()
        if self.sparse is not None:
            out["opt_sparse"] = self.sparse.to_dict()
            out["m"] = self.m
            out["final_sparse_regret"] = self.final_sparse_regret
        if self.adaptive is not None:
            out["adaptive_regret"] = self.adaptive
            out["tau"] = self.tau
        return out


def build_regret_report(stream, expected, realized=None, *, s: int,
                        m: int | None = None, tau: int | None = None) -> RegretReport:
    table = StreamTable(stream)
    expected = np.asarray(expected, dtype=np.float64)
    realized_arr = None if realized is None else np.asarray(realized, dtype=np.float64)
    shifted = shifted_opt(table, s)
    sparse = sparse_shifted_opt(table, s, m) if m is not None else None
    adaptive = adaptive_regret(table, expected, tau) if tau is not None else None
    return RegretReport(expected, realized_arr, shifted, s,
                        sparse=sparse, m=m, adaptive=adaptive, tau=tau)
