"""
Interval type-2 fuzzy inference.

Antecedents are Gaussian sets with an uncertain mean in ``[m1, m2]`` and a
fixed spread.  Rules fire over an interval ``[lo, hi]`` built with the
product t-norm.  Two output paths are provided:

* ``km_type_reduce`` + ``defuzzify`` -- center-of-sets type reduction with
  the iterative Karnik-Mendel switch-point search, then the midpoint.
* ``basis_vector`` -- the averaged normalised firing vector ``xi`` that
  makes the output linear in the consequents, ``y = theta @ xi``.  The
  adaptive controller uses this path.

Consequents are crisp (``w_l = w_r = theta_i``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class NonFiringInputError(ValueError):
    """No rule fires (every upper firing strength is zero)."""


# ---------------------------------------------------------------------------
# Sets and memberships
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IT2GaussianSet:
    """Gaussian set whose mean is only known to lie in ``[m1, m2]``."""

    m1: float
    m2: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.m1) and math.isfinite(self.m2)):
            raise ValueError("means must be finite")
        if self.m1 > self.m2:
            raise ValueError(f"m1 ({self.m1}) must not exceed m2 ({self.m2})")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def bounds(self, x: float) -> tuple[float, float]:
        return eval_mf_bounds(self, x)


def _mf_bounds_arrays(m1, m2, sigma, x):
    """Vectorised (lower, upper) envelopes; arguments broadcast together.

    With ``a = |x - (m1+m2)/2|`` and half-width ``w``, the lower envelope is the
    Gaussian at distance ``a + w`` and the upper one at ``max(a - w, 0)``.
    """
    mid = 0.5 * (m1 + m2)
    w = 0.5 * (m2 - m1)
    a = np.abs(x - mid)
    inv = -0.5 / (sigma * sigma)
    far = a + w
    near = np.maximum(a - w, 0.0)
    return np.exp(far * far * inv), np.exp(near * near * inv)


def _mf_bounds_packed(packed, x):
    # packed rows: mid, [+w; -w], -1/(2 sigma^2) duplicated; x already gathered
    mid, pm_w, inv2 = packed
    d = np.maximum(np.abs(x - mid) + pm_w, 0.0)
    g = np.exp(d * d * inv2)
    return g[0], g[1]


def eval_mf_bounds(s: IT2GaussianSet, x: float) -> tuple[float, float]:
    """Lower and upper membership of ``x`` in ``s``.

    The upper envelope is flat at 1 over ``[m1, m2]`` and follows the nearer
    shifted Gaussian outside it; the lower envelope follows the farther one.
    """
    if not math.isfinite(x):
        raise ValueError(f"input must be finite, got {x}")
    lo, hi = _mf_bounds_arrays(s.m1, s.m2, s.sigma, float(x))
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiringInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"invalid firing interval [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Rule:
    antecedents: tuple[IT2GaussianSet, ...]
    consequent_index: int


@dataclass(frozen=True)
class Rulebase:
    """Ordered rule list.

    Distinct antecedent sets are evaluated once per input, so a grid of
    ``K**d`` rules costs ``K*d`` membership evaluations.
    """

    rules: tuple[Rule, ...]
    _packed: tuple = field(init=False, repr=False, compare=False)
    _input_of: np.ndarray = field(init=False, repr=False, compare=False)
    _gather: np.ndarray = field(init=False, repr=False, compare=False)
    _index: np.ndarray = field(init=False, repr=False, compare=False)
    _identity: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rules = tuple(self.rules)
        if not rules:
            raise ValueError("rulebase needs at least one rule")
        dims = {len(r.antecedents) for r in rules}
        if len(dims) != 1 or 0 in dims:
            raise ValueError("every rule needs the same, nonzero number of antecedents")
        d = dims.pop()
        params, input_of, slot = [], [], {}
        gather = np.empty((len(rules), d), dtype=int)
        for i, r in enumerate(rules):
            for j, a in enumerate(r.antecedents):
                key = (j, a.m1, a.m2, a.sigma)
                if key not in slot:
                    slot[key] = len(params)
                    params.append((a.m1, a.m2, a.sigma))
                    input_of.append(j)
                gather[i, j] = slot[key]
        idx = np.array([r.consequent_index for r in rules], dtype=int)
        if idx.min() < 0:
            raise ValueError("consequent indices must be non-negative")
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("rules", rules)
        m1, m2, sigma = np.array(params, dtype=float).T
        w = 0.5 * (m2 - m1)
        inv = -0.5 / (sigma * sigma)
        set_("_packed", (0.5 * (m1 + m2), np.stack([w, -w]), np.stack([inv, inv])))
        set_("_input_of", np.array(input_of, dtype=int))
        set_("_gather", gather)
        set_("_index", idx)
        set_("_identity", bool(np.array_equal(idx, np.arange(idx.size))))

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    @property
    def n_inputs(self) -> int:
        return self._gather.shape[1]

    @property
    def n_consequents(self) -> int:
        return int(self._index.max()) + 1

    @property
    def consequent_index(self) -> np.ndarray:
        return self._index

    def firing_arrays(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper firing strengths of every rule, each of shape ``(M,)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.n_inputs,):
            raise ValueError(f"expected {self.n_inputs} inputs, got shape {x.shape}")
        if not math.isfinite(x.sum()):
            raise ValueError(f"non-finite input {x}")
        lower, upper = _mf_bounds_packed(self._packed, x[self._input_of])
        g = self._gather
        if g.shape[1] == 1:
            return lower[g[:, 0]], upper[g[:, 0]]
        return lower[g].prod(axis=1), upper[g].prod(axis=1)


def firing_interval(rule: Rule, x) -> FiringInterval:
    """Product t-norm of the antecedent membership bounds."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (len(rule.antecedents),):
        raise ValueError(f"rule has {len(rule.antecedents)} antecedents, got {x.shape[0]} inputs")
    lo = hi = 1.0
    for a, xj in zip(rule.antecedents, x):
        l, u = eval_mf_bounds(a, xj)
        lo *= l
        hi *= u
    return FiringInterval(lo, hi)


def build_grid_rulebase(sets_per_input: Sequence[Sequence[IT2GaussianSet]]) -> Rulebase:
    """Full Cartesian-product rulebase, the last input varying fastest."""
    if not sets_per_input or any(len(s) == 0 for s in sets_per_input):
        raise ValueError("every input needs at least one fuzzy set")
    combos = itertools.product(*sets_per_input)
    return Rulebase(tuple(Rule(tuple(c), i) for i, c in enumerate(combos)))


# ---------------------------------------------------------------------------
# Type reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedOutput:
    y_l: float
    y_r: float


def _as_firing_arrays(firings) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(firings, tuple) and len(firings) == 2 and isinstance(firings[0], np.ndarray):
        return np.asarray(firings[0], float), np.asarray(firings[1], float)
    lo = np.array([f.lo for f in firings], dtype=float)
    hi = np.array([f.hi for f in firings], dtype=float)
    return lo, hi


def _weighted_mean(f, w):
    # scaled by the largest weight so tiny strengths keep full precision
    top = f.max()
    if top == 0.0:
        return None
    f = f / top
    return float(f @ w / f.sum())


def _km_endpoint(w, lo, hi, right: bool) -> float:
    # w sorted ascending.  For the right point rules below the switch k
    # take the lower strength and the rest the upper strength; the left
    # point is the mirror image.
    pos = np.arange(w.size)
    sign = 1.0 if right else -1.0

    def y_at(k):
        below = pos < k
        f = np.where(below, lo, hi) if right else np.where(below, hi, lo)
        y = _weighted_mean(f, w)
        return -math.inf if y is None else sign * y

    # Karnik-Mendel iteration on the (sign-adjusted) objective
    y = _weighted_mean(0.5 * lo + 0.5 * hi, w)
    if y is None:
        y = _weighted_mean(hi, w)
    k = int(np.searchsorted(w, y, side="right"))
    best = y_at(k)
    for _ in range(w.size + 1):
        k_new = int(np.searchsorted(w, sign * best, side="right"))
        if k_new == k:
            break
        y_new = y_at(k_new)
        if y_new <= best:
            break
        k, best = k_new, y_new
    # the objective is unimodal in k; rounding can leave flat steps, so
    # walk across ties and keep any strict gain
    for step in (-1, 1):
        j, level = k, best
        while 0 <= j + step <= w.size:
            y_j = y_at(j + step)
            if y_j < level:
                break
            j, level = j + step, y_j
            if y_j > best:
                k, best = j, y_j
    return sign * best


def km_type_reduce(firings, consequents) -> ReducedOutput:
    """Center-of-sets type reduction by the Karnik-Mendel iteration.

    Parameters
    ----------
    firings : sequence of FiringInterval, or a ``(lo, hi)`` pair of arrays
    consequents : sequence of float, one per rule

    Returns
    -------
    ReducedOutput
        ``y_l`` / ``y_r`` are the minimum / maximum of ``sum(f w) / sum(f)``
        over ``f_i`` in ``[lo_i, hi_i]``.
    """
    lo, hi = _as_firing_arrays(firings)
    w = np.asarray(consequents, dtype=float)
    if lo.size == 0:
        raise ValueError("empty rulebase")
    if w.shape != lo.shape:
        raise ValueError(f"{lo.size} firing intervals but {w.size} consequents")
    if not np.any(hi > 0):
        raise NonFiringInputError("all firing strengths are zero")
    order = np.argsort(w, kind="stable")
    w, lo, hi = w[order], lo[order], hi[order]
    return ReducedOutput(_km_endpoint(w, lo, hi, right=False), _km_endpoint(w, lo, hi, right=True))


def defuzzify(r: ReducedOutput) -> float:
    return 0.5 * (r.y_l + r.y_r)


# ---------------------------------------------------------------------------
# Linear-in-parameter basis
# ---------------------------------------------------------------------------

def normalized_firing(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Average of the lower- and upper-normalised firing vectors."""
    s_hi = hi.sum()
    if not s_hi > 0:
        raise NonFiringInputError("no rule fires at this input")
    upper_part = hi / s_hi
    s_lo = lo.sum()
    if s_lo > 0:
        return 0.5 * (lo / s_lo + upper_part)
    return upper_part


def basis_vector(rulebase: Rulebase, x) -> np.ndarray:
    """Fuzzy basis ``xi(x)`` indexed by consequent; sums to one."""
    lo, hi = rulebase.firing_arrays(x)
    xi = normalized_firing(lo, hi)
    if rulebase._identity:
        return xi
    return np.bincount(rulebase.consequent_index, weights=xi, minlength=rulebase.n_consequents)


class FuzzyApproximator:
    """Rulebase plus an adjustable consequent vector; output ``theta @ xi(x)``."""

    def __init__(self, rulebase: Rulebase, theta=None):
        self.rulebase = rulebase
        if theta is None:
            theta = np.zeros(rulebase.n_consequents)
        self.theta = np.array(theta, dtype=float)
        if self.theta.shape != (rulebase.n_consequents,):
            raise ValueError(
                f"theta must have length {rulebase.n_consequents}, got {self.theta.shape}")

    def basis(self, x) -> np.ndarray:
        return basis_vector(self.rulebase, x)

    def __call__(self, x) -> float:
        return float(self.theta @ self.basis(x))

    def type_reduce(self, x) -> ReducedOutput:
        """KM interval of the current rulebase output at ``x`` (diagnostic path)."""
        lo, hi = self.rulebase.firing_arrays(x)
        return km_type_reduce((lo, hi), self.theta[self.rulebase.consequent_index])
