"""Online forecasters for piecewise-constant utilities on [0, 1].

Five algorithm state machines share a uniform interface: ``act`` samples
an action from the current density, ``update`` observes a utility
function and advances the state, ``expected_payoff`` integrates the
current density against a utility exactly.

* ExponentialForecaster: density proportional to exp(lam * cumulative utility).
* FixedShareForecaster: exponential update mixed with a uniform share.
* GeneralizedShareForecaster: the share is an exponentially discounted
  mixture of past sampling densities (discount rate gamma).
* RandomRestartForecaster: the randomized surrogate that restarts from
  uniform with probability alpha each round; its weights match the fixed
  share weights in expectation but the algorithm itself tracks poorly.
* DiscreteFixedShareForecaster: fixed share over a finite midpoint grid
  of ceil(T**beta) points.

All continuous weights live on the running merged breakpoint grid in
natural-log scale.  Each instance owns its rng (seeded from the config),
so parallel instances are independently reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._backend import kernels
from .errors import ParameterError
from .piecewise import LogDensity, PiecewiseConstant, merge_breakpoints, regrid_values, values_on_grid

__all__ = [
    "ForecasterConfig",
    "ExponentialForecaster",
    "FixedShareForecaster",
    "GeneralizedShareForecaster",
    "RandomRestartForecaster",
    "DiscreteFixedShareForecaster",
    "FORECASTERS",
    "make_forecaster",
    "default_params_shifted",
    "default_params_sparse",
    "default_params_adaptive",
    "restart_weight_ensemble",
]

# The decision set is [0, 1]: dimension 1, contained in a ball of radius 1/2.
DOMAIN_DIM = 1
DOMAIN_RADIUS = 0.5


@dataclass(frozen=True)
class ForecasterConfig:
    """Shared algorithm parameters.

    lam is the step size in (0, 1/H]; alpha the exploration share in
    [0, 1]; gamma the discount rate of the generalized share mixture
    (gamma >= 0; large gamma forgets the past quickly); H the payoff
    bound; beta the declared dispersion exponent (drives the discrete
    grid size); seed the per-instance rng seed.

    mix_includes_current switches whether the discounted mixture used in
    a round's update already includes that round's sampling density (the
    default) or only strictly earlier ones.
    """

    lam: float
    alpha: float = 0.0
    gamma: float = 0.0
    H: float = 1.0
    beta: float = 0.5
    seed: int = 0
    mix_includes_current: bool = True

    def __post_init__(self):
        if not self.H > 0:
            raise ParameterError(f"H must be positive, got {self.H}")
        if not (0.0 < self.lam <= 1.0 / self.H + 1e-12):
            raise ParameterError(f"need 0 < lam <= 1/H, got lam={self.lam}, H={self.H}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.gamma >= 0.0:
            raise ParameterError(f"gamma must be nonnegative, got {self.gamma}")
        if not self.beta >= 0.0:
            raise ParameterError(f"beta must be nonnegative, got {self.beta}")


def _clamped_step_size(inner: float, H: float) -> float:
    # Tiny horizons can push the closed-form bracket to zero or below; the
    # theory gives no guidance there, so fall back to the largest legal step.
    if inner <= 0.0:
        return 1.0 / H
    return min(math.sqrt(inner) / H, 1.0 / H)


def default_params_shifted(T: int, s: int, beta: float, H: float = 1.0):
    """Step size and exploration rate tuned for s-shifted regret.

    alpha = s/T and lam = sqrt(s * (d*log(R*T**beta) + log(T/s)) / T) / H
    with d = 1, R = 1/2, clamped into (0, 1/H].
    """
    if not 1 <= s <= T:
        raise ParameterError(f"need 1 <= s <= T, got s={s}, T={T}")
    alpha = s / T
    inner = s * (DOMAIN_DIM * math.log(DOMAIN_RADIUS * T**beta) + math.log(T / s)) / T
    return _clamped_step_size(inner, H), alpha


def default_params_sparse(T: int, s: int, m: int, beta: float, H: float = 1.0):
    """Parameters tuned for (m-sparse, s-shifted) regret.

    alpha = s/T, gamma = s/(m*T), and
    lam = sqrt((m*d*log(R*T**beta) + s*log(T/s)) / T) / H, clamped.
    """
    if not 1 <= m <= s <= T:
        raise ParameterError(f"need 1 <= m <= s <= T, got m={m}, s={s}, T={T}")
    alpha = s / T
    gamma = s / (m * T)
    inner = (m * DOMAIN_DIM * math.log(DOMAIN_RADIUS * T**beta) + s * math.log(T / s)) / T
    return _clamped_step_size(inner, H), alpha, gamma


def default_params_adaptive(tau: int, beta: float, H: float = 1.0):
    """Parameters tuned for tau-adaptive regret: alpha = 1/tau and
    lam = sqrt((d*log(R*tau**beta) + log(tau)) / tau) / H, clamped."""
    if not tau >= 1:
        raise ParameterError(f"need tau >= 1, got {tau}")
    alpha = 1.0 / tau
    inner = (DOMAIN_DIM * math.log(DOMAIN_RADIUS * tau**beta) + math.log(tau)) / tau
    return _clamped_step_size(inner, H), alpha


class _DensityForecaster:
    """Shared machinery for the algorithms keeping a continuous weight density."""

    name = "density"

    def __init__(self, config: ForecasterConfig):
        self.cfg = config
        self.weight = LogDensity.uniform()
        self.t = 1
        self._rng = np.random.default_rng(config.seed)

    def act(self, rng: np.random.Generator | None = None) -> float:
        """Sample an action with probability proportional to the weight."""
        return self.weight.sample(self._rng if rng is None else rng)

    def density(self) -> PiecewiseConstant:
        return self.weight.density()

    def log_normalizer(self) -> float:
        """log of the current total weight W_t."""
        return self.weight.log_integral()

    def _sync(self, u: PiecewiseConstant) -> np.ndarray:
        """Merge u's breakpoints into the weight grid; return u's values on it."""
        return self.weight.align(u)

    def expected_payoff(self, u: PiecewiseConstant) -> float:
        """Exact integral of the current sampling density against u."""
        w = self.weight
        vals = self._sync(u)
        probs = np.exp(w.log_values - w.log_integral())
        widths = np.exp(w.log_widths)
        return float(np.sum(widths * probs * vals))

    def _check_utility(self, u: PiecewiseConstant) -> None:
        u.check_bounds(self.cfg.H)

    def update(self, u: PiecewiseConstant) -> None:
        self._check_utility(u)
        self._advance(u)
        self.t += 1

    def _advance(self, u: PiecewiseConstant) -> None:
        raise NotImplementedError


class ExponentialForecaster(_DensityForecaster):
    """Pure continuous exponential weights (no exploration)."""

    name = "exponential"

    def _advance(self, u):
        w = self.weight
        lam_u = self.cfg.lam * self._sync(u)
        kernels.share_step(w.log_values, lam_u, w.log_widths, 0.0)


class FixedShareForecaster(_DensityForecaster):
    """Exponential update mixed with a uniform share of rate alpha."""

    name = "fixed_share"

    def _advance(self, u):
        w = self.weight
        lam_u = self.cfg.lam * self._sync(u)
        kernels.share_step(w.log_values, lam_u, w.log_widths, self.cfg.alpha)


class GeneralizedShareForecaster(_DensityForecaster):
    """Share drawn from a discounted mixture of past sampling densities.

    The mixture is maintained by the decayed accumulator
    S <- exp(-gamma) * S + p_t with normalizer n <- exp(-gamma) * n + 1,
    which is algebraically identical to the discounted average of all
    past densities while costing O(pieces) per round.
    """

    name = "generalized_share"

    def __init__(self, config: ForecasterConfig, record_history: bool = False):
        super().__init__(config)
        self._mix = np.zeros(1)  # linear-scale, aligned to the weight grid
        self._mix_norm = 0.0
        self._record = record_history
        self.history: list[dict] = []

    def mixture(self) -> PiecewiseConstant:
        """The current discounted mixture as a normalized step function.

        An empty mixture (before any update) is defined as uniform.
        """
        if self._mix_norm <= 0.0:
            return PiecewiseConstant(self.weight.breakpoints,
                                     np.ones(self.weight.breakpoints.size + 1))
        return PiecewiseConstant(self.weight.breakpoints, self._mix / self._mix_norm)

    def _sync(self, u: PiecewiseConstant) -> np.ndarray:
        # The mixture accumulator must follow every weight-grid refinement.
        w = self.weight
        if u.breakpoints.size:
            grid = np.union1d(w.breakpoints, u.breakpoints)
            if grid.size != w.breakpoints.size:
                self._mix = regrid_values(w.breakpoints, self._mix, grid)
                w.regrid(grid)
        return values_on_grid(u, w.breakpoints)

    def _advance(self, u):
        cfg = self.cfg
        w = self.weight
        lam_u = cfg.lam * self._sync(u)
        log_norm = kernels.logsumexp_weighted(w.log_values, w.log_widths)
        p_vals = np.exp(w.log_values - log_norm)
        decay = math.exp(-cfg.gamma)

        if cfg.mix_includes_current:
            self._mix = decay * self._mix + p_vals
            self._mix_norm = decay * self._mix_norm + 1.0
            pi = self._mix / self._mix_norm
        elif self._mix_norm > 0.0:
            pi = self._mix / self._mix_norm
        else:
            pi = np.ones_like(p_vals)

        with np.errstate(divide="ignore"):
            log_pi = np.log(pi)
        if self._record:
            self.history.append({
                "t": self.t,
                "breakpoints": w.breakpoints.copy(),
                "mixture": pi.copy(),
                "log_normalizer": float(log_norm),
            })
        kernels.share_step(w.log_values, lam_u, w.log_widths, cfg.alpha, log_pi)

        if not cfg.mix_includes_current:
            self._mix = decay * self._mix + p_vals
            self._mix_norm = decay * self._mix_norm + 1.0


class RandomRestartForecaster(_DensityForecaster):
    """Restart-from-uniform with probability alpha instead of deterministic mixing."""

    name = "random_restart"

    def __init__(self, config: ForecasterConfig):
        super().__init__(config)
        self.restart_log: list[bool] = []

    def step_with(self, u: PiecewiseConstant, z: float) -> None:
        """Apply one update given the restart draw z (uniform in [0, 1))."""
        w = self.weight
        lam_u = self.cfg.lam * self._sync(u)
        log_norm = kernels.share_step(w.log_values, lam_u, w.log_widths, 0.0)
        restarted = not (z < 1.0 - self.cfg.alpha)
        if restarted:
            self.weight = LogDensity(np.empty(0), np.asarray([log_norm]))
        self.restart_log.append(restarted)

    def _advance(self, u):
        self.step_with(u, float(self._rng.random()))


class DiscreteFixedShareForecaster:
    """Fixed share over a finite grid of ceil(horizon**beta) midpoints.

    The grid spacing 1/N is at most horizon**(-beta), so every point of
    [0, 1] is within horizon**(-beta) of a grid point.
    """

    name = "discrete_fixed_share"

    def __init__(self, config: ForecasterConfig, horizon: int):
        if not horizon >= 1:
            raise ParameterError(f"horizon must be >= 1, got {horizon}")
        self.cfg = config
        self.n_points = max(1, math.ceil(horizon**config.beta))
        self.grid = (np.arange(self.n_points) + 0.5) / self.n_points
        self.log_weights = np.zeros(self.n_points)
        self.t = 1
        self._rng = np.random.default_rng(config.seed)

    def probabilities(self) -> np.ndarray:
        z = kernels.logsumexp(self.log_weights)
        return np.exp(self.log_weights - z)

    def act(self, rng: np.random.Generator | None = None) -> float:
        rng = self._rng if rng is None else rng
        cum = np.cumsum(self.probabilities())
        idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        return float(self.grid[min(idx, self.n_points - 1)])

    def expected_payoff(self, u: PiecewiseConstant) -> float:
        return float(np.sum(self.probabilities() * u(self.grid)))

    def update(self, u: PiecewiseConstant) -> None:
        u.check_bounds(self.cfg.H)
        alpha = self.cfg.alpha
        e = self.log_weights + self.cfg.lam * u(self.grid)
        norm = kernels.logsumexp(e)
        if alpha <= 0.0:
            self.log_weights = e
        elif alpha >= 1.0:
            self.log_weights = np.full_like(e, math.log(1.0 / self.n_points) + norm)
        else:
            self.log_weights = np.logaddexp(
                math.log1p(-alpha) + e,
                math.log(alpha / self.n_points) + norm,
            )
        self.t += 1


FORECASTERS = {
    "exponential": ExponentialForecaster,
    "fixed_share": FixedShareForecaster,
    "generalized_share": GeneralizedShareForecaster,
    "random_restart": RandomRestartForecaster,
    "discrete_fixed_share": DiscreteFixedShareForecaster,
}


def make_forecaster(name: str, config: ForecasterConfig, horizon: int | None = None):
    try:
        cls = FORECASTERS[name]
    except KeyError:
        raise ParameterError(
            f"unknown forecaster {name!r}; choose from {sorted(FORECASTERS)}"
        ) from None
    if cls is DiscreteFixedShareForecaster:
        if horizon is None:
            raise ParameterError("discrete_fixed_share requires a horizon")
        return cls(config, horizon)
    if cls is ExponentialForecaster and config.alpha != 0.0:
        config = replace(config, alpha=0.0)
    return cls(config)


def restart_weight_ensemble(functions, lam: float, alpha: float, n_runs: int,
                            rng: np.random.Generator):
    """Monte Carlo over restart draws: final-round weights of the restart
    forecaster, vectorized across independent runs.

    Returns (breakpoints, mean, stderr) of the linear-scale final weights
    per merged piece.  One uniform per round per run, drawn round-major,
    matching RandomRestartForecaster.step_with semantics.
    """
    functions = list(functions)
    grid = merge_breakpoints(functions) if functions else np.empty(0)
    u_matrix = np.stack([values_on_grid(f, grid) for f in functions]) if functions else np.empty((0, 1))
    edges = np.concatenate(([0.0], grid, [1.0]))
    widths = np.diff(edges)

    weights = np.ones((n_runs, grid.size + 1))
    for t in range(len(functions)):
        updated = weights * np.exp(lam * u_matrix[t])[None, :]
        integrals = updated @ widths
        restart = rng.random(n_runs) >= 1.0 - alpha
        weights = np.where(restart[:, None], integrals[:, None], updated)
    mean = weights.mean(axis=0)
    stderr = weights.std(axis=0, ddof=1) / math.sqrt(n_runs) if n_runs > 1 else np.zeros_like(mean)
    return grid, mean, stderr
