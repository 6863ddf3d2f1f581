"""Numeric verification suites behind the ``verify`` CLI subcommand.

Each check replays one of the package's structural identities or
inequalities at a fixed seed and reports the measured deviation against
its tolerance.  Suites: identities, sampler, oracles, lowerbound, all.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .environments import (
    dispersion_profile,
    lower_bound_stream,
    random_stream,
    two_expert_stream,
)
from .errors import ParameterError
from .forecasters import (
    FixedShareForecaster,
    ForecasterConfig,
    GeneralizedShareForecaster,
    restart_weight_ensemble,
)
from .mixture import MixtureSampler
from .oracles import StreamTable, adaptive_regret, interval_best, shifted_opt, sparse_shifted_opt
from .piecewise import LogDensity, PiecewiseConstant, merge_breakpoints, values_on_grid

__all__ = ["run_suite", "SUITES"]


def _check(name, passed, deviation, tolerance, detail=""):
    return {
        "name": name,
        "passed": bool(passed),
        "deviation": float(deviation),
        "tolerance": float(tolerance),
        "detail": detail,
    }


def _log_integral_exp(stream_fns, lam, start, stop, weights=None):
    """log of the integral of weights(rho) * exp(lam * sum_{t=start..stop-1} u_t)."""
    fns = stream_fns[start - 1:stop - 1]
    acc = LogDensity.uniform()
    for f in fns:
        acc.accumulate(f, lam)
    if weights is not None:
        vals = acc.align(weights)
        with np.errstate(divide="ignore"):
            acc.log_values = acc.log_values + np.log(vals)
    return acc.log_integral()


# -- identities ---------------------------------------------------------------


def _normalizer_identity(cls, **cfg_extra):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(4):
        stream = random_stream(12, 3, 1.0, rng)
        f = cls(ForecasterConfig(lam=0.7, alpha=0.35, gamma=0.4, seed=3, **cfg_extra))
        for u in stream:
            pre = f.weight.copy()
            pre.accumulate(u, f.cfg.lam)
            direct = pre.log_integral()
            f.update(u)
            worst = max(worst, abs(f.weight.log_integral() - direct))
    return worst


def check_normalizer_fixed_share():
    worst = _normalizer_identity(FixedShareForecaster)
    return _check("normalizer_identity_fixed_share", worst <= 1e-9, worst, 1e-9)


def check_normalizer_generalized_share():
    worst = _normalizer_identity(GeneralizedShareForecaster)
    return _check("normalizer_identity_generalized_share", worst <= 1e-9, worst, 1e-9)


def check_partition_sum():
    """Total weight after T rounds equals the restart-pattern expansion."""
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(5):
        T = 6
        stream = random_stream(T, 2, 1.0, rng)
        lam, alpha = 0.9, float(rng.uniform(0.05, 0.95))
        f = FixedShareForecaster(ForecasterConfig(lam=lam, alpha=alpha))
        for u in stream:
            f.update(u)
        log_w = f.weight.log_integral()
        fns = list(stream)
        total = 0.0
        for pattern in itertools.product([0, 1], repeat=T - 1):
            times = [1] + [t + 2 for t, bit in enumerate(pattern) if bit] + [T + 1]
            coef = (alpha ** sum(pattern)) * ((1 - alpha) ** (T - 1 - sum(pattern)))
            prod = coef
            for a, b in zip(times[:-1], times[1:]):
                prod *= math.exp(_log_integral_exp(fns, lam, a, b))
            total += prod
        worst = max(worst, abs(math.exp(log_w) / total - 1.0))
    return _check("partition_sum", worst <= 1e-9, worst, 1e-9)


def check_restart_expectation():
    """Restart-forecaster weights average to the fixed share weights."""
    rng = np.random.default_rng(23)
    worst = 0.0
    for _ in range(2):
        stream = random_stream(6, 2, 1.0, rng)
        lam, alpha = 0.8, 0.4
        grid, mean, stderr = restart_weight_ensemble(stream, lam, alpha, 4000, rng)
        f = FixedShareForecaster(ForecasterConfig(lam=lam, alpha=alpha))
        for u in stream:
            f.update(u)
        fs_vals = values_on_grid(
            PiecewiseConstant(f.weight.breakpoints, np.exp(f.weight.log_values)), grid)
        z = np.abs(mean - fs_vals) / np.maximum(4.0 * stderr, 1e-12)
        worst = max(worst, float(z.max()))
    return _check("restart_expectation", worst <= 1.0, worst, 1.0,
                  "worst |mean - w| in units of 4 standard errors")


def check_mixture_recursion():
    """p_t = (1-a) e^{lam u} w_{t-1} / W_t + a * pi_{t-1} on every piece."""
    rng = np.random.default_rng(31)
    stream = random_stream(10, 3, 1.0, rng)
    cfg = ForecasterConfig(lam=0.6, alpha=0.3, gamma=0.5)
    f = GeneralizedShareForecaster(cfg, record_history=True)
    worst = 0.0
    prev_weight = None
    prev_mix = None
    for u in stream:
        if prev_weight is not None:
            w = f.weight
            dens = np.exp(w.log_values - w.log_integral())
            prev_vals = values_on_grid(
                PiecewiseConstant(prev_weight.breakpoints, np.exp(prev_weight.log_values)),
                w.breakpoints)
            u_prev = values_on_grid(prev_u, w.breakpoints)
            log_w_t = w.log_integral()
            lhs = dens
            rhs = ((1 - cfg.alpha) * np.exp(cfg.lam * u_prev) * prev_vals / math.exp(log_w_t)
                   + cfg.alpha * values_on_grid(prev_mix, w.breakpoints))
            worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), 1e-300))))
        prev_weight = f.weight.copy()
        prev_u = u
        f.update(u)
        prev_mix = f.mixture()  # the mixture actually blended into this update
    return _check("mixture_recursion", worst <= 1e-9, worst, 1e-9)


def check_share_lower_bound():
    """W_T >= a (1-a)^(T-t) * integral(pi_{t-1} * wtilde(.; t, T)) * W_t."""
    rng = np.random.default_rng(37)
    stream = random_stream(9, 2, 1.0, rng)
    cfg = ForecasterConfig(lam=0.5, alpha=0.25, gamma=0.6)
    f = GeneralizedShareForecaster(cfg, record_history=True)
    fns = list(stream)
    log_w = []
    for u in fns:
        log_w.append(f.weight.log_integral())
        f.update(u)
    T = len(fns)
    worst = -np.inf
    for t in range(1, T):
        if t == 1:
            mix = PiecewiseConstant(np.empty(0), np.asarray([1.0]))
        else:
            hist = f.history[t - 2]
            mix = PiecewiseConstant(hist["breakpoints"], hist["mixture"])
        log_mixed = _log_integral_exp(fns, cfg.lam, t, T, weights=mix)
        rhs = (math.log(cfg.alpha) + (T - t) * math.log1p(-cfg.alpha)
               + log_mixed + log_w[t - 1])
        margin = rhs - log_w[T - 1]
        worst = max(worst, margin)
    return _check("share_lower_bound", worst <= 1e-9, worst, 1e-9,
                  "max over t of log(bound) - log(W_T); <= 0 means the bound holds")


def check_boundedness():
    rng = np.random.default_rng(41)
    stream = random_stream(20, 4, 1.0, rng)
    lam = 1.0
    worst = 0.0
    ok = True
    for u in stream:
        inc = lam * u.values
        ok = ok and bool(np.all(inc >= 0.0) and np.all(inc <= 1.0))
        worst = max(worst, float(np.max(inc)))
    return _check("boundedness", ok, worst, 1.0,
                  "per-round log-weight increments stay in [0, 1]")


# -- sampler ------------------------------------------------------------------


def _mixture_vs_direct(n_streams=20, max_T=25):
    rng = np.random.default_rng(53)
    worst_density = 0.0
    worst_simplex = 0.0
    worst_norm = 0.0
    for _ in range(n_streams):
        T = int(rng.integers(3, max_T + 1))
        stream = random_stream(T, 4, 1.0, rng)
        lam = float(rng.uniform(0.1, 1.0))
        alpha = float(rng.uniform(0.0, 1.0))
        direct = FixedShareForecaster(ForecasterConfig(lam=lam, alpha=alpha))
        mix = MixtureSampler(lam, alpha)
        for u in stream:
            d_direct = direct.density()
            d_mix = mix.density()
            grid = merge_breakpoints([d_direct, d_mix])
            a = values_on_grid(d_direct, grid)
            b = values_on_grid(d_mix, grid)
            worst_density = max(worst_density, float(np.max(np.abs(a - b) / np.abs(a))))
            worst_simplex = max(worst_simplex, abs(float(np.sum(mix.coefficients)) - 1.0))
            worst_norm = max(worst_norm, abs(mix.log_normalizers[-1]
                                             - direct.weight.log_integral()))
            direct.update(u)
            mix.observe(u)
    return worst_density, worst_simplex, worst_norm


def check_mixture_density_equivalence():
    wd, ws, wn = _mixture_vs_direct()
    passed = wd <= 1e-9 and ws <= 1e-9 and wn <= 1e-9
    return _check("mixture_density_equivalence", passed, max(wd, ws, wn), 1e-9,
                  f"density {wd:.3g}, simplex {ws:.3g}, normalizer {wn:.3g}")


def check_piece_frequency():
    rng = np.random.default_rng(59)
    bps = np.asarray([0.1, 0.35, 0.5, 0.8])
    dens = LogDensity(bps, np.asarray([0.0, 2.0, -1.0, 1.5, 0.4]))
    n = 100_000
    draws = np.asarray([dens.sample(rng) for _ in range(n)])
    log_mass = dens.log_values + dens.log_widths
    mass = np.exp(log_mass - log_mass.max())
    probs = mass / mass.sum()
    edges = np.concatenate(([0.0], bps, [1.0]))
    counts = np.histogram(draws, bins=edges)[0]
    se = np.sqrt(probs * (1 - probs) / n)
    z = np.abs(counts / n - probs) / np.maximum(se, 1e-12)
    worst = float(z.max())
    return _check("piece_frequency", worst <= 4.0, worst, 4.0,
                  "per-piece |empirical - mass| in standard errors over 1e5 draws")


def check_diagnostics_dump():
    rng = np.random.default_rng(61)
    stream = random_stream(6, 2, 1.0, rng)
    mix = MixtureSampler(0.7, 0.2)
    for u in stream:
        mix.observe(u)
    dump = mix.diagnostics()
    import json

    blob = json.dumps(dump)
    keys_ok = {"t", "log_W", "coefficients", "coefficient_sum", "renormalizations"} <= dump.keys()
    dev = abs(dump["coefficient_sum"] - 1.0)
    return _check("diagnostics_dump", keys_ok and dev <= 1e-9, dev, 1e-9, blob)


# -- oracles ------------------------------------------------------------------


def _enumerate_opt(table: StreamTable, s: int, m: int | None) -> float:
    """Exhaustive search over segmentations and expert assignments.

    Segment values are prefix differences folded in the same association
    as the recursion so agreement is exact.
    """
    T = table.n_rounds
    n_pieces = table.midpoints.size
    best = -np.inf
    for shifts in itertools.combinations(range(2, T + 1), s - 1):
        times = [1] + list(shifts) + [T + 1]
        if m is None or m >= min(s, n_pieces):
            value = 0.0
            for a, b in zip(times[:-1], times[1:]):
                value = float(np.max((value - table.cum[a - 1]) + table.cum[b - 1]))
            best = max(best, value)
        else:
            for subset in itertools.combinations(range(n_pieces), m):
                for assign in itertools.product(subset, repeat=s):
                    value = 0.0
                    for (a, b), p in zip(zip(times[:-1], times[1:]), assign):
                        value = (value - table.cum[a - 1, p]) + table.cum[b - 1, p]
                    best = max(best, float(value))
    return best


def check_dp_vs_enumeration():
    rng = np.random.default_rng(67)
    worst = 0.0
    for _ in range(30):
        T = int(rng.integers(3, 8))
        stream = random_stream(T, 2, 1.0, rng)
        table = StreamTable(stream)
        s = int(rng.integers(1, min(4, T) + 1))
        got = shifted_opt(table, s).value
        want = _enumerate_opt(table, s, None)
        worst = max(worst, abs(got - want))
        m = int(rng.integers(1, min(2, s) + 1))
        got_sparse = sparse_shifted_opt(table, s, m).value
        want_sparse = _enumerate_opt(table, s, m)
        worst = max(worst, abs(got_sparse - want_sparse))
    return _check("dp_vs_enumeration", worst == 0.0, worst, 0.0)


def check_monotonicity():
    rng = np.random.default_rng(71)
    stream = random_stream(12, 3, 1.0, rng)
    table = StreamTable(stream)
    values = [shifted_opt(table, s).value for s in range(1, 13)]
    diffs = np.diff(values)
    worst = float(-diffs.min()) if diffs.size else 0.0
    full = float(np.sum(table.per_round.max(axis=1)))
    dev = abs(values[-1] - full)
    passed = bool(np.all(diffs >= -1e-12)) and dev <= 1e-9
    return _check("opt_monotonicity", passed, max(worst, dev), 1e-9,
                  "nondecreasing in s and opt(T) = per-round maxima")


def check_adaptive_scan():
    rng = np.random.default_rng(73)
    stream = random_stream(15, 2, 1.0, rng)
    table = StreamTable(stream)
    payoff = rng.uniform(0, 1, size=15)
    worst = 0.0
    for tau in (1, 4, 7, 15):
        got = adaptive_regret(table, payoff, tau)
        want = -np.inf
        for r in range(1, 16):
            for q in range(r, min(15, r + tau) + 1):
                want = max(want, interval_best(table, r, q)[0]
                           - float(np.sum(payoff[r - 1:q])))
        worst = max(worst, abs(got - want))
    return _check("adaptive_scan", worst == 0.0, worst, 0.0)


# -- lowerbound ---------------------------------------------------------------


def check_lower_bound_structure():
    rng = np.random.default_rng(83)
    T, s, beta = 512, 2, 0.6
    stream = lower_bound_stream(T, s, beta, rng)
    ok = len(stream) == T
    spacing = T ** (-beta)
    halve_target = 3 * T ** (1 - beta)
    dev = 0.0
    for phase in stream.provenance["phases"]:
        pts = phase["points"]
        if len(pts) > 1:
            gaps = np.diff(pts)
            dev = max(dev, float(np.max(np.abs(gaps - spacing))))
        ok = ok and abs(phase["n_halve"] - halve_target) <= 1.0
    try:
        lower_bound_stream(64, 2, math.log(6) / math.log(64), np.random.default_rng(0))
        rejected = False
    except ParameterError:
        rejected = True
    ok = ok and rejected
    return _check("lower_bound_structure", ok and dev <= 1e-9 * spacing,
                  dev, 1e-9 * spacing,
                  "exact length, lattice spacing, halving count, boundary beta rejected")


def check_dispersion_fit():
    rng = np.random.default_rng(89)
    T, s, beta = 512, 2, 0.6
    worst = 0.0
    for _ in range(3):
        stream = lower_bound_stream(T, s, beta, rng)
        eps = T ** (-beta)
        count = dispersion_profile(stream, [eps])[0]
        constant = count / (T ** (1 - beta) * math.log(T))
        worst = max(worst, constant)
    return _check("dispersion_fit", worst <= 10.0, worst, 10.0,
                  "worst-ball count at eps = T^-beta over T^(1-beta) log T")


def check_profile_monotone():
    rng = np.random.default_rng(97)
    stream = random_stream(40, 3, 1.0, rng)
    eps = [1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.5]
    counts = dispersion_profile(stream, eps)
    diffs = np.diff(counts)
    passed = bool(np.all(diffs >= 0))
    return _check("profile_monotone", passed, float(-diffs.min()) if diffs.size else 0.0, 0.0)


def check_two_expert_gap():
    rng = np.random.default_rng(101)
    T = 256
    results = []
    for s in (1, 4):
        gaps = []
        for _ in range(100):
            stream = two_expert_stream(T, s, rng)
            gaps.append(shifted_opt(stream, s).value - T / 2)
        gaps = np.asarray(gaps)
        target = math.sqrt(s * T / 8)
        slack = 3 * gaps.std(ddof=1) / math.sqrt(gaps.size)
        results.append(gaps.mean() - (target - slack))
    worst = min(results)
    return _check("two_expert_gap", worst >= 0.0, worst, 0.0,
                  "mean excess of the shifted optimum over T/2 vs sqrt(sT/8) - 3 se")


SUITES = {
    "identities": [
        check_normalizer_fixed_share,
        check_normalizer_generalized_share,
        check_partition_sum,
        check_restart_expectation,
        check_mixture_recursion,
        check_share_lower_bound,
        check_boundedness,
    ],
    "sampler": [
        check_mixture_density_equivalence,
        check_piece_frequency,
        check_diagnostics_dump,
    ],
    "oracles": [
        check_dp_vs_enumeration,
        check_monotonicity,
        check_adaptive_scan,
    ],
    "lowerbound": [
        check_lower_bound_structure,
        check_dispersion_fit,
        check_profile_monotone,
        check_two_expert_gap,
    ],
}


def run_suite(name: str) -> dict:
    if name == "all":
        checks = [fn for suite in SUITES.values() for fn in suite]
    elif name in SUITES:
        checks = SUITES[name]
    else:
        raise ParameterError(f"unknown suite {name!r}; choose from "
                             f"{sorted(SUITES) + ['all']}")
    results = [fn() for fn in checks]
    return {
        "suite": name,
        "passed": all(r["passed"] for r in results),
        "checks": results,
    }
