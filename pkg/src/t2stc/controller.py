"""
Sliding surfaces, super-twisting control and its adaptive type-2 fuzzy form.

Sign convention.  From the error dynamics ``e^(n) = f + df + d + u - y_d^(n)``
the surface derivative is ``s' = e^(n) + delta_s``, so every law below
enters ``-delta_s`` into ``u``.  After nominal cancellation the surface obeys

    s' = (f - f_hat) + D + u1 + u2

with ``u1`` the integral (or ``theta_1 . xi_1(s) t``) term and ``u2`` the
``|s|^(1/2)`` term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .it2fls import FuzzyApproximator, IT2GaussianSet, build_grid_rulebase

StateFn = Callable[[np.ndarray, float], float]


def sign(v: float) -> float:
    return float((v > 0) - (v < 0))


# ---------------------------------------------------------------------------
# Surface algebra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlidingSpec:
    """``s = (d/dt + lam)^(n-1) e``.

    Error vectors hold derivatives in order, ``e[j] = e^(j)``.
    """

    n: int = 2
    lam: float = 10.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"order must be >= 2, got {self.n}")
        if not self.lam > 0:
            raise ValueError(f"slope must be positive, got {self.lam}")
        n, lam = self.n, self.lam
        # s = sum_k C(n-1,k) lam^k e^(n-1-k);  delta_s = sum_{k>=1} C(n-1,k) lam^k e^(n-k)
        s_coef = np.zeros(n)
        d_coef = np.zeros(n)
        for k in range(n):
            s_coef[n - 1 - k] = math.comb(n - 1, k) * lam ** k
        for k in range(1, n):
            d_coef[n - k] = math.comb(n - 1, k) * lam ** k
        object.__setattr__(self, "_s_coef", s_coef)
        object.__setattr__(self, "_d_coef", d_coef)

    def _check(self, e) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        if e.shape[-1:] != (self.n,):
            raise ValueError(f"error vector must have length {self.n}, got shape {e.shape}")
        return e

    def value(self, e) -> float:
        return sliding_value(self, e)

    def delta(self, e) -> float:
        return delta_s(self, e)


def sliding_value(spec: SlidingSpec, e):
    """Binomial expansion of ``(d/dt + lam)^(n-1) e``."""
    v = spec._check(e) @ spec._s_coef
    return float(v) if np.ndim(v) == 0 else v


def delta_s(spec: SlidingSpec, e):
    """Part of ``s'`` not containing ``e^(n)``, so that ``s' = e^(n) + delta_s``."""
    v = spec._check(e) @ spec._d_coef
    return float(v) if np.ndim(v) == 0 else v


# ---------------------------------------------------------------------------
# Super twisting with known dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuperTwistingGains:
    lambda1: float
    lambda2: float
    eta: float = 0.1
    delta: float = 0.0

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda2 > 0 and self.eta > 0):
            raise ValueError("super-twisting gains and eta must be positive")
        if self.delta < 0:
            raise ValueError("uncertainty bound must be non-negative")


def stc_gain_feasible(g: SuperTwistingGains, s: float, t: float) -> bool:
    """Reaching-gain inequality ``lambda1 t + lambda2 |s|^(1/2) >= eta + Delta``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return g.lambda1 * t + g.lambda2 * math.sqrt(abs(s)) >= g.eta + g.delta


def ideal_stc_control(spec: SlidingSpec, g: SuperTwistingGains, f_true: float, ydd: float,
                      e, s: float, u1_state: float) -> tuple[float, float]:
    """Equivalent control plus super-twisting terms.

    Returns ``(u, u1_dot)``; the caller integrates ``u1_dot`` into ``u1_state``.
    """
    sg = sign(s)
    u1_dot = -g.lambda1 * sg
    u2 = -g.lambda2 * math.sqrt(abs(s)) * sg
    u = -f_true + ydd - delta_s(spec, e) + u1_state + u2
    return u, u1_dot


def first_order_smc_control(spec: SlidingSpec, f_known: float, ydd: float, e, s: float,
                            k_switch: float) -> float:
    """Classical sign-switching law, used as the chattering baseline."""
    return -f_known + ydd - delta_s(spec, e) - k_switch * sign(s)


def project_params(theta, radius: float) -> np.ndarray:
    """Radial projection onto the ball ``||theta|| <= radius``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    theta = np.asarray(theta, dtype=float)
    norm = math.sqrt(float(theta @ theta))
    if norm <= radius:
        return theta
    if radius == 0:
        return np.zeros_like(theta)
    out = theta * (radius / norm)
    # guard the last ulp so the bound holds exactly
    while np.linalg.norm(out) > radius:
        out = np.nextafter(out, 0.0)
    return out


# ---------------------------------------------------------------------------
# Stateful controllers driven by the simulator
#
# control(t, x, e, s, ydd) -> u     evaluated once per step (zero-order hold)
# advance(t, x, e, s, h)           integrates internal state over that step
# ---------------------------------------------------------------------------

class NoControl:
    kind = "none"

    def control(self, t, x, e, s, ydd):
        return 0.0

    def advance(self, t, x, e, s, h):
        pass

    def param_norms(self):
        return (0.0, 0.0, 0.0)


class IdealSTC:
    kind = "ideal_stc"

    def __init__(self, spec: SlidingSpec, gains: SuperTwistingGains, f_known: StateFn):
        self.spec = spec
        self.gains = gains
        self.f_known = f_known
        self.u1 = 0.0

    def control(self, t, x, e, s, ydd):
        u, _ = ideal_stc_control(self.spec, self.gains, self.f_known(x, t), ydd, e, s, self.u1)
        return u

    def advance(self, t, x, e, s, h):
        self.u1 += h * -self.gains.lambda1 * sign(s)

    def param_norms(self):
        return (0.0, 0.0, 0.0)


class FirstOrderSMC:
    kind = "first_order_smc"

    def __init__(self, spec: SlidingSpec, k_switch: float, f_known: StateFn):
        if not k_switch > 0:
            raise ValueError("switching gain must be positive")
        self.spec = spec
        self.k_switch = k_switch
        self.f_known = f_known

    def control(self, t, x, e, s, ydd):
        return first_order_smc_control(self.spec, self.f_known(x, t), ydd, e, s, self.k_switch)

    def advance(self, t, x, e, s, h):
        pass

    def param_norms(self):
        return (0.0, 0.0, 0.0)


# projection radii for theta_f, theta_1, theta_2
DEFAULT_RADII = (67.0, 0.37, 24.0)


class AdaptiveController:
    """Adaptive interval type-2 fuzzy super-twisting controller.

    Three approximators replace the unknown dynamics and both
    super-twisting terms::

        f_hat = theta_f . xi_f(x)
        u1    = theta_1 . xi_1(s) * clock
        u2    = |s|^(1/2) theta_2 . xi_2(s)

    ``clock`` is the elapsed time since the controller started and is never
    reset.
    """

    kind = "adaptive_t2_stc"

    def __init__(self, spec: SlidingSpec, f_hat: FuzzyApproximator, u1_hat: FuzzyApproximator,
                 u2_hat: FuzzyApproximator, gamma_f: float, gamma_1: float, gamma_2: float,
                 radii: Optional[Sequence[float]] = DEFAULT_RADII, clock: float = 0.0):
        if min(gamma_f, gamma_1, gamma_2) <= 0:
            raise ValueError("adaptation gains must be positive")
        self.spec = spec
        self.f_hat = f_hat
        self.u1_hat = u1_hat
        self.u2_hat = u2_hat
        self.gamma_f = gamma_f
        self.gamma_1 = gamma_1
        self.gamma_2 = gamma_2
        self.radii = None if radii is None else tuple(float(r) for r in radii)
        self.clock = clock
        self._cache_key = None
        self._cache = None

    def bases(self, x, s: float):
        key = (tuple(np.asarray(x, dtype=float)), float(s))
        if key != self._cache_key:
            xi_s1 = self.u1_hat.basis(s)
            xi_s2 = xi_s1 if self.u2_hat.rulebase is self.u1_hat.rulebase else self.u2_hat.basis(s)
            self._cache = (self.f_hat.basis(x), xi_s1, xi_s2)
            self._cache_key = key
        return self._cache

    def terms(self, x, s: float, t: Optional[float] = None) -> tuple[float, float, float]:
        """Current ``(f_hat, u1_hat, u2_hat)``."""
        t = self.clock if t is None else t
        xi_f, xi_1, xi_2 = self.bases(x, s)
        return (float(self.f_hat.theta @ xi_f),
                float(self.u1_hat.theta @ xi_1) * t,
                math.sqrt(abs(s)) * float(self.u2_hat.theta @ xi_2))

    def adaptive_control(self, x, e, s: float, ydd: float, t: Optional[float] = None) -> float:
        f_hat, u1, u2 = self.terms(x, s, t)
        return -f_hat + ydd - delta_s(self.spec, e) + u1 + u2

    def adapt_step(self, s: float, x, t: float, h: float) -> None:
        """Explicit Euler step of the three adaptation laws, then projection."""
        if not h > 0:
            raise ValueError("step must be positive")
        xi_f, xi_1, xi_2 = self.bases(x, s)
        self.f_hat.theta = self.f_hat.theta + h * self.gamma_f * s * xi_f
        self.u1_hat.theta = self.u1_hat.theta - h * self.gamma_1 * s * t * xi_1
        self.u2_hat.theta = self.u2_hat.theta - h * self.gamma_2 * s * math.sqrt(abs(s)) * xi_2
        if self.radii is not None:
            mf, m1, m2 = self.radii
            self.f_hat.theta = project_params(self.f_hat.theta, mf)
            self.u1_hat.theta = project_params(self.u1_hat.theta, m1)
            self.u2_hat.theta = project_params(self.u2_hat.theta, m2)

    # simulator protocol

    def control(self, t, x, e, s, ydd):
        return self.adaptive_control(x, e, s, ydd)

    def advance(self, t, x, e, s, h):
        self.adapt_step(s, x, self.clock, h)
        self.clock += h

    def param_norms(self):
        return tuple(math.sqrt(float(a.theta @ a.theta))
                     for a in (self.f_hat, self.u1_hat, self.u2_hat))


# ---------------------------------------------------------------------------
# Default fuzzy partitions
# ---------------------------------------------------------------------------

# (m1, m2) of the seven state sets, shared by x1 and x2
STATE_MF_MEANS = (
    (-3.5, -2.5), (-2.5, -1.5), (-1.5, -0.5), (-0.5, 0.5),
    (0.5, 1.5), (1.5, 2.5), (2.5, 3.5),
)
STATE_MF_SIGMA = 0.5

# Negative / Zero / Positive partitions of the surface, one per
# super-twisting approximator.  Both must stay firing for |s| up to the
# initial surface value, so they are wider than the state sets.
SURFACE1_MF_MEANS = ((-1.0, -0.7), (-0.2, 0.2), (0.7, 1.0))
SURFACE1_MF_SIGMA = 0.85
SURFACE2_MF_MEANS = ((-3.6, -2.4), (-0.6, 0.6), (2.4, 3.6))
SURFACE2_MF_SIGMA = 2.3


def make_sets(means, sigma) -> list[IT2GaussianSet]:
    if np.ndim(sigma) == 0:
        sigma = [sigma] * len(means)
    return [IT2GaussianSet(float(a), float(b), float(sg)) for (a, b), sg in zip(means, sigma)]


def build_adaptive_controller(
    spec: SlidingSpec = SlidingSpec(2, 10.0),
    gamma_f: float = 15.0,
    gamma_1: float = 10.0,
    gamma_2: float = 6.0,
    state_sets: Optional[Sequence[Sequence[IT2GaussianSet]]] = None,
    surface_sets: Optional[Sequence[IT2GaussianSet]] = None,
    surface2_sets: Optional[Sequence[IT2GaussianSet]] = None,
    radii: Optional[Sequence[float]] = DEFAULT_RADII,
) -> AdaptiveController:
    """Controller with zero initial consequents and grid rulebases.

    ``surface2_sets`` defaults to its own partition; pass the same list as
    ``surface_sets`` to share one rulebase between both surface terms.
    """
    if state_sets is None:
        state_sets = [make_sets(STATE_MF_MEANS, STATE_MF_SIGMA)] * spec.n
    if surface_sets is None:
        surface_sets = make_sets(SURFACE1_MF_MEANS, SURFACE1_MF_SIGMA)
    if surface2_sets is None:
        surface2_sets = make_sets(SURFACE2_MF_MEANS, SURFACE2_MF_SIGMA)
    f_rb = build_grid_rulebase(state_sets)
    s1_rb = build_grid_rulebase([surface_sets])
    s2_rb = s1_rb if list(surface2_sets) == list(surface_sets) else build_grid_rulebase([surface2_sets])
    return AdaptiveController(
        spec,
        FuzzyApproximator(f_rb),
        FuzzyApproximator(s1_rb),
        FuzzyApproximator(s2_rb),
        gamma_f, gamma_1, gamma_2, radii,
    )
