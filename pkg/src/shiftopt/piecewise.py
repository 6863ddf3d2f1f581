"""Exact algebra, log-domain integration, and sampling for step functions on [0, 1].

Every utility function and every weight density in the package is
piecewise constant, represented by sorted interior breakpoints and one
value per piece.  Piece ``i`` covers the half-open interval
``[edge_i, edge_{i+1})`` with ``edge_0 = 0``; the final piece is closed
at 1, so evaluation is total on [0, 1].

Weights are kept in natural-log scale throughout: cumulative exponents
grow linearly with the number of rounds and would overflow in linear
scale.  Integration uses log-sum-exp with max subtraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._backend import kernels
from .errors import DomainError, ParameterError, ValidationError

__all__ = [
    "PiecewiseConstant",
    "LogDensity",
    "merge_breakpoints",
    "values_on_grid",
    "regrid_values",
]


def _check_breakpoints(bp: np.ndarray) -> None:
    if bp.ndim != 1:
        raise ValidationError("breakpoints must be one-dimensional")
    if bp.size:
        if not np.all(np.isfinite(bp)):
            raise ValidationError("breakpoints must be finite")
        if bp[0] <= 0.0 or bp[-1] >= 1.0:
            raise ValidationError("breakpoints must lie strictly inside (0, 1)")
        if np.any(np.diff(bp) <= 0.0):
            raise ValidationError("breakpoints must be strictly increasing")


@dataclass(frozen=True)
class PiecewiseConstant:
    """A step function on [0, 1]: interior breakpoints plus per-piece values."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.ascontiguousarray(self.breakpoints, dtype=np.float64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        _check_breakpoints(bp)
        if vals.ndim != 1 or vals.size != bp.size + 1:
            raise ValidationError(
                f"need len(values) == len(breakpoints) + 1, got {vals.size} and {bp.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError("piece values must be finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate(([0.0], self.breakpoints, [1.0]))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def midpoints(self) -> np.ndarray:
        edges = self.edges
        return 0.5 * (edges[:-1] + edges[1:])

    def piece_index(self, rho):
        arr = np.asarray(rho, dtype=np.float64)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise DomainError(f"point outside [0, 1]: {rho!r}")
        idx = np.searchsorted(self.breakpoints, arr, side="right")
        return int(idx) if np.isscalar(rho) or arr.ndim == 0 else idx

    def __call__(self, rho):
        idx = self.piece_index(rho)
        out = self.values[idx]
        return float(out) if np.isscalar(idx) or isinstance(idx, int) else out

    def check_bounds(self, high: float, low: float = 0.0) -> None:
        """Raise unless all values lie in [low, high] (utility validation)."""
        if self.values.size and (self.values.min() < low or self.values.max() > high):
            raise ValidationError(
                f"values outside [{low}, {high}]: range "
                f"[{self.values.min()}, {self.values.max()}]"
            )

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PiecewiseConstant":
        return cls(np.asarray(data["breakpoints"], dtype=np.float64),
                   np.asarray(data["values"], dtype=np.float64))

    @classmethod
    def constant(cls, value: float) -> "PiecewiseConstant":
        return cls(np.empty(0), np.asarray([value]))


def merge_breakpoints(fs: Iterable) -> np.ndarray:
    """Sorted union of the breakpoints of all inputs, exact duplicates removed.

    Accepts anything with a ``breakpoints`` attribute (functions or
    densities) or bare arrays.  Each input can be refined onto the merged
    grid without changing its values.
    """
    parts = []
    n = 0
    for f in fs:
        bp = getattr(f, "breakpoints", f)
        parts.append(np.asarray(bp, dtype=np.float64))
        n += 1
    if n == 0:
        raise ValidationError("merge requires at least one input")
    if n == 1:
        return np.unique(parts[0])
    return np.unique(np.concatenate(parts))


def values_on_grid(f: PiecewiseConstant, breakpoints: np.ndarray) -> np.ndarray:
    """Values of ``f`` on a refinement of its grid (one value per new piece)."""
    return regrid_values(f.breakpoints, f.values, breakpoints)


def regrid_values(old_bp: np.ndarray, values: np.ndarray, new_bp: np.ndarray) -> np.ndarray:
    """Re-express per-piece values on a finer grid; values are unchanged.

    ``new_bp`` must be a superset of ``old_bp``; each new piece takes the
    value of the old piece containing its left edge.
    """
    if old_bp.size == new_bp.size:
        return np.asarray(values, dtype=np.float64)
    left_edges = np.concatenate(([0.0], new_bp))
    idx = np.searchsorted(old_bp, left_edges, side="right")
    return np.asarray(values, dtype=np.float64)[idx]


def _sample_pieces(breakpoints: np.ndarray, log_values: np.ndarray,
                   log_widths: np.ndarray, rng: np.random.Generator) -> float:
    """Draw a point: a piece with probability proportional to its mass, then
    uniformly within the piece.  Consumes exactly two uniforms."""
    log_mass = log_values + log_widths
    m = np.max(log_mass)
    if not np.isfinite(m):
        raise ValidationError("density has no mass")
    w = np.exp(log_mass - m)
    cum = np.cumsum(w)
    u = rng.random() * cum[-1]
    idx = int(np.searchsorted(cum, u, side="right"))
    if idx >= cum.size:
        idx = cum.size - 1
    edges = np.concatenate(([0.0], breakpoints, [1.0]))
    return float(edges[idx] + rng.random() * (edges[idx + 1] - edges[idx]))


class LogDensity:
    """Unnormalized weight density on [0, 1] in natural-log scale.

    Mutable, single-owner: the accumulator pattern used by the forecasters.
    Entries may be -inf (zero weight on a piece) but the total integral
    must stay finite.
    """

    __slots__ = ("breakpoints", "log_values", "_log_widths")

    def __init__(self, breakpoints=None, log_values=None):
        bp = (np.empty(0) if breakpoints is None
              else np.ascontiguousarray(breakpoints, dtype=np.float64))
        lv = (np.zeros(bp.size + 1) if log_values is None
              else np.ascontiguousarray(log_values, dtype=np.float64))
        _check_breakpoints(bp)
        if lv.ndim != 1 or lv.size != bp.size + 1:
            raise ValidationError(
                f"need len(log_values) == len(breakpoints) + 1, got {lv.size} and {bp.size}"
            )
        if np.any(np.isnan(lv)) or np.any(lv == np.inf):
            raise ValidationError("log values must not be nan or +inf")
        self.breakpoints = bp
        self.log_values = lv
        self._log_widths = None

    @classmethod
    def uniform(cls) -> "LogDensity":
        return cls()

    def copy(self) -> "LogDensity":
        out = LogDensity.__new__(LogDensity)
        out.breakpoints = self.breakpoints.copy()
        out.log_values = self.log_values.copy()
        out._log_widths = None
        return out

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate(([0.0], self.breakpoints, [1.0]))

    @property
    def log_widths(self) -> np.ndarray:
        if self._log_widths is None:
            self._log_widths = np.log(np.diff(self.edges))
        return self._log_widths

    def regrid(self, breakpoints: np.ndarray) -> None:
        """Refine onto a superset grid (values unchanged as a function)."""
        self.log_values = regrid_values(self.breakpoints, self.log_values, breakpoints)
        self.breakpoints = breakpoints
        self._log_widths = None

    def align(self, f: PiecewiseConstant) -> np.ndarray:
        """Merge ``f``'s breakpoints into this grid; return ``f``'s values on it."""
        if f.breakpoints.size:
            grid = np.union1d(self.breakpoints, f.breakpoints)
            if grid.size != self.breakpoints.size:
                self.regrid(grid)
        return values_on_grid(f, self.breakpoints)

    def accumulate(self, u: PiecewiseConstant, lam: float) -> "LogDensity":
        """Add ``lam * u`` to the log values (exponential weight update)."""
        if not lam > 0.0:
            raise ParameterError(f"step size must be positive, got {lam}")
        if u.values.size and lam * float(np.max(np.abs(u.values))) > 1.0 + 1e-9:
            raise ParameterError(
                f"step size {lam} exceeds 1/H for utility with max |value| "
                f"{float(np.max(np.abs(u.values)))}"
            )
        vals = self.align(u)
        self.log_values = self.log_values + lam * vals
        return self

    def log_integral(self) -> float:
        """log of the integral of the density over [0, 1]."""
        return float(kernels.logsumexp_weighted(self.log_values, self.log_widths))

    def density(self) -> PiecewiseConstant:
        """The normalized probability density as a step function."""
        log_i = self.log_integral()
        if not np.isfinite(log_i):
            raise ValidationError("density has no mass")
        return PiecewiseConstant(self.breakpoints, np.exp(self.log_values - log_i))

    def sample(self, rng: np.random.Generator) -> float:
        """Draw a point with probability proportional to the density."""
        return _sample_pieces(self.breakpoints, self.log_values, self.log_widths, rng)
