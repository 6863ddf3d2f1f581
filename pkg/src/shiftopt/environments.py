"""Utility-stream generators and stream-level diagnostics.

Streams are finite sequences of piecewise-constant utilities on [0, 1]
with values in [0, H].  Generators cover the canonical two-step
counterexample, the stochastic two-expert instance, random fuzz streams,
block-alternating recurring environments, and the phased adversarial
construction whose discontinuities are spread on a T**(-beta) lattice.

Every generator is a deterministic function of its parameters and rng,
and records full provenance in the stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError, ValidationError
from .piecewise import PiecewiseConstant

__all__ = [
    "UtilityStream",
    "step_left",
    "step_right",
    "indicator_interval",
    "counterexample_stream",
    "alternating_stream",
    "two_expert_stream",
    "random_stream",
    "lower_bound_stream",
    "dispersion_profile",
    "build_stream",
    "GENERATORS",
]


def step_left() -> PiecewiseConstant:
    """Payoff 1 strictly left of 1/2, 0 from 1/2 on."""
    return PiecewiseConstant(np.asarray([0.5]), np.asarray([1.0, 0.0]))


def step_right() -> PiecewiseConstant:
    """Payoff 0 strictly left of 1/2, 1 from 1/2 on."""
    return PiecewiseConstant(np.asarray([0.5]), np.asarray([0.0, 1.0]))


def indicator_interval(lo: float, hi: float) -> PiecewiseConstant:
    """Payoff 1 on [lo, hi) within [0, 1] (closed at 1 when hi == 1)."""
    if not 0.0 <= lo < hi <= 1.0:
        raise ParameterError(f"need 0 <= lo < hi <= 1, got [{lo}, {hi}]")
    bps = [x for x in (lo, hi) if 0.0 < x < 1.0]
    if not bps:
        values = [1.0]
    elif len(bps) == 2:
        values = [0.0, 1.0, 0.0]
    elif lo == 0.0:
        values = [1.0, 0.0]
    else:
        values = [0.0, 1.0]
    return PiecewiseConstant(np.asarray(bps), np.asarray(values))


@dataclass
class UtilityStream:
    """A finite sequence of utilities with bound, dispersion tag, and provenance."""

    functions: list
    H: float = 1.0
    declared_beta: float | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.functions:
            raise ValidationError("a stream needs at least one function")
        if not self.H > 0:
            raise ValidationError(f"H must be positive, got {self.H}")
        for i, f in enumerate(self.functions):
            if not isinstance(f, PiecewiseConstant):
                raise ValidationError(f"function {i} is not piecewise constant")
            try:
                f.check_bounds(self.H)
            except ValidationError as exc:
                raise ValidationError(f"function {i}: {exc}") from None

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, idx):
        return self.functions[idx]

    def truncated(self, T: int) -> "UtilityStream":
        if not 1 <= T <= len(self):
            raise ParameterError(f"cannot truncate length-{len(self)} stream to {T}")
        if T == len(self):
            return self
        prov = dict(self.provenance)
        prov["truncated_to"] = T
        return UtilityStream(self.functions[:T], self.H, self.declared_beta, prov)

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "H": self.H,
            "declared_beta": self.declared_beta,
            "functions": [f.to_dict() for f in self.functions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UtilityStream":
        return cls(
            [PiecewiseConstant.from_dict(f) for f in data["functions"]],
            H=float(data.get("H", 1.0)),
            declared_beta=data.get("declared_beta"),
            provenance=data.get("provenance", {}),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "UtilityStream":
        return cls.from_dict(json.loads(Path(path).read_text()))


def counterexample_stream(T: int) -> UtilityStream:
    """T/2 rounds paying left of 1/2, then T/2 rounds paying right.

    The single-shift instance on which pure exponential weights keep
    linear 2-shifted regret.
    """
    if T < 2 or T % 2:
        raise ParameterError(f"T must be even and >= 2, got {T}")
    fns = [step_left()] * (T // 2) + [step_right()] * (T // 2)
    return UtilityStream(fns, provenance={"generator": "counterexample", "T": T})


def alternating_stream(T: int, block: int = 1) -> UtilityStream:
    """Blocks of the two step functions alternating left/right.

    A recurring environment: only two experts ever pay, but they swap
    every ``block`` rounds.  T must be a multiple of block.
    """
    if not (T >= 1 and block >= 1 and T % block == 0):
        raise ParameterError(f"need T divisible by block, got T={T}, block={block}")
    fns = [step_left() if (t // block) % 2 == 0 else step_right() for t in range(T)]
    return UtilityStream(
        fns,
        provenance={"generator": "alternating", "T": T, "block": block,
                    "blocks": T // block},
    )


def two_expert_stream(T: int, s: int, rng: np.random.Generator) -> UtilityStream:
    """Each round pays on a uniformly random side of 1/2.

    The stochastic instance behind the sqrt(s*T/8) shifted-regret lower
    bound: the two sides play the role of two experts with complementary
    0/1 payoffs; s tags the intended shift budget of the comparator.
    """
    if not (1 <= s <= T and T % s == 0):
        raise ParameterError(f"need 1 <= s <= T with s | T, got s={s}, T={T}")
    flips = rng.integers(0, 2, size=T)
    left, right = step_left(), step_right()
    fns = [left if f == 0 else right for f in flips]
    return UtilityStream(
        fns,
        provenance={"generator": "two_expert", "T": T, "s": s,
                    "left_count": int(T - flips.sum())},
    )


def random_stream(T: int, K: int, H: float, rng: np.random.Generator) -> UtilityStream:
    """Fuzz substrate: up to K uniform breakpoints and iid uniform values per round.

    K = 0 yields constant functions.
    """
    if T < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    if K < 0:
        raise ParameterError(f"K must be >= 0, got {K}")
    if not H > 0:
        raise ParameterError(f"H must be positive, got {H}")
    fns = []
    for _ in range(T):
        k = int(rng.integers(0, K + 1))
        bps = np.unique(rng.random(k))
        bps = bps[(bps > 0.0) & (bps < 1.0)]
        values = rng.uniform(0.0, H, size=bps.size + 1)
        fns.append(PiecewiseConstant(bps, values))
    return UtilityStream(
        fns, H=H,
        provenance={"generator": "random", "T": T, "K": K, "H": H},
    )


def _largest_gap(used: list[float]) -> tuple[float, float]:
    pts = np.concatenate(([0.0], np.sort(np.asarray(used)), [1.0])) if used else np.asarray([0.0, 1.0])
    gaps = np.diff(pts)
    i = int(np.argmax(gaps))
    return float(pts[i]), float(pts[i + 1])


def lower_bound_stream(T: int, s: int, beta: float,
                       rng: np.random.Generator) -> UtilityStream:
    """Phased adversary forcing Omega(sqrt(s*T) + s*T**(1-beta)) shifted regret.

    s phases, each in the largest discontinuity-free interval so far.
    A phase first plays a two-expert block: discontinuity points spaced
    exactly T**(-beta) apart inside a width-1/(3s) band at the interval's
    center, each point reused for about 3*T**(1-beta) consecutive rounds
    paying on a random side.  It then plays a halving block of about
    3*T**(1-beta) rounds, each paying on a random half of the better
    sub-interval and recursing into the paying half.  Counts are rounded
    so the stream has exactly T functions.

    Requires beta > log(3s)/log(T); the stream is beta-dispersed by
    construction.
    """
    if T < 2 or s < 1:
        raise ParameterError(f"need T >= 2 and s >= 1, got T={T}, s={s}")
    if not beta > math.log(3 * s) / math.log(T):
        raise ParameterError(
            f"need beta > log(3s)/log(T) = {math.log(3 * s) / math.log(T):.6f}, "
            f"got beta={beta}"
        )
    spacing = T ** (-beta)
    halve_nominal = round(3 * T ** (1.0 - beta))
    base, rem = divmod(T, s)
    budgets = [base + (1 if i < rem else 0) for i in range(s)]

    fns: list[PiecewiseConstant] = []
    used: list[float] = []
    phases = []
    for phase_idx, n_phase in enumerate(budgets):
        if n_phase == 0:
            continue
        lo, hi = _largest_gap(used)
        length = hi - lo
        center = 0.5 * (lo + hi)
        band_width = min(1.0 / (3.0 * s), length / 3.0)
        n_halve = min(halve_nominal, n_phase)
        n_two = n_phase - n_halve

        points: list[float] = []
        left_tally = right_tally = 0
        if n_two > 0:
            n_pts = max(1, int(math.floor(band_width / spacing)) - 1)
            n_pts = min(n_pts, n_two)
            offset = center - spacing * (n_pts + 1) / 2.0
            points = [offset + spacing * (j + 1) for j in range(n_pts)]
            per_point, extra = divmod(n_two, n_pts)
            for j, q in enumerate(points):
                reps = per_point + (1 if j < extra else 0)
                sides = rng.integers(0, 2, size=reps)
                for side in sides:
                    if side == 0:
                        fns.append(PiecewiseConstant(np.asarray([q]), np.asarray([1.0, 0.0])))
                        left_tally += 1
                    else:
                        fns.append(PiecewiseConstant(np.asarray([q]), np.asarray([0.0, 1.0])))
                        right_tally += 1
                used.append(q)

        if points:
            band_lo = min(points) - spacing / 2.0
            band_hi = max(points) + spacing / 2.0
        else:
            band_lo = band_hi = center
        if left_tally >= right_tally:
            j_lo, j_hi = lo, band_lo
        else:
            j_lo, j_hi = band_hi, hi
        if not j_lo < j_hi:
            j_lo, j_hi = lo, hi

        for _ in range(n_halve):
            mid = 0.5 * (j_lo + j_hi)
            if not j_lo < mid < j_hi:
                f = indicator_interval(max(j_lo, 0.0), min(j_hi, 1.0))
            elif rng.integers(0, 2) == 0:
                f = indicator_interval(j_lo, mid)
                j_hi = mid
            else:
                f = indicator_interval(mid, j_hi)
                j_lo = mid
            fns.append(f)
            used.extend(float(b) for b in f.breakpoints)

        phases.append({
            "interval": [lo, hi],
            "band": [band_lo, band_hi],
            "points": points,
            "n_two": n_two,
            "n_halve": n_halve,
            "start_round": len(fns) - n_phase + 1,
        })

    return UtilityStream(
        fns, declared_beta=beta,
        provenance={"generator": "lower_bound", "T": T, "s": s, "beta": beta,
                    "spacing": spacing, "phases": phases},
    )


def dispersion_profile(stream, epsilons) -> np.ndarray:
    """Worst-ball discontinuity counts for each radius.

    For each epsilon, the maximum over points rho of the number of
    functions with at least one discontinuity in the open ball
    (rho - eps, rho + eps); each function counts at most once per ball.
    Computed by a sliding window over the sorted discontinuity multiset.
    """
    functions = getattr(stream, "functions", stream)
    locs: list[float] = []
    fids: list[int] = []
    for t, f in enumerate(functions):
        for b in f.breakpoints:
            locs.append(float(b))
            fids.append(t)
    if not locs:
        return np.zeros(len(list(epsilons)), dtype=np.int64)
    order = np.argsort(locs, kind="stable")
    locs_arr = np.asarray(locs)[order]
    fids_arr = np.asarray(fids)[order]

    out = []
    for eps in epsilons:
        if not eps > 0:
            raise ParameterError(f"epsilon must be positive, got {eps}")
        width = 2.0 * eps
        best = 0
        counts: dict[int, int] = {}
        distinct = 0
        j = 0
        for i in range(locs_arr.size):
            while j < locs_arr.size and locs_arr[j] - locs_arr[i] < width:
                fid = int(fids_arr[j])
                c = counts.get(fid, 0)
                if c == 0:
                    distinct += 1
                counts[fid] = c + 1
                j += 1
            if distinct > best:
                best = distinct
            fid = int(fids_arr[i])
            counts[fid] -= 1
            if counts[fid] == 0:
                distinct -= 1
        out.append(best)
    return np.asarray(out, dtype=np.int64)


def build_stream(name: str, T: int, rng: np.random.Generator, **params) -> UtilityStream:
    """Uniform entry point for the registered generators (used by the CLI)."""
    try:
        builder = GENERATORS[name]
    except KeyError:
        raise ParameterError(
            f"unknown generator {name!r}; choose from {sorted(GENERATORS)}"
        ) from None
    return builder(T, rng, **params)


def _build_counterexample(T, rng, **params):
    return counterexample_stream(T, **params)


def _build_alternating(T, rng, *, block=1, **params):
    return alternating_stream(T, block=int(block), **params)


def _build_two_expert(T, rng, *, s=1, **params):
    return two_expert_stream(T, int(s), rng, **params)


def _build_random(T, rng, *, K=3, H=1.0, **params):
    return random_stream(T, int(K), float(H), rng, **params)


def _build_lower_bound(T, rng, *, s=1, beta=0.5, **params):
    return lower_bound_stream(T, int(s), float(beta), rng, **params)


def _build_clustering(T, rng, *, scenario="two_phase", grid_n=128, **params):
    from .clustering import clustering_stream

    return clustering_stream(scenario, T, int(grid_n), rng, **params)


GENERATORS = {
    "counterexample": _build_counterexample,
    "alternating": _build_alternating,
    "two_expert": _build_two_expert,
    "random": _build_random,
    "lower_bound": _build_lower_bound,
    "clustering": _build_clustering,
}
