"""
Affine chaotic plants in integrator-chain form, reference trajectories and
measurement noise.

    x_i' = x_{i+1}                       (i < n)
    x_n' = f(x, t) + df(x, t) + d(t) + u
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

StateFn = Callable[[np.ndarray, float], float]

# bound used for the nominal dynamics when nothing better is known
DEFAULT_F_BOUND = 50.0


@dataclass(frozen=True)
class PlantBounds:
    F: float
    delta_f: float
    delta_d: float

    @property
    def total_uncertainty(self) -> float:
        return self.delta_f + self.delta_d


@dataclass(frozen=True)
class PlantModel:
    n: int
    f_nominal: StateFn
    delta_f: StateFn
    disturbance: Callable[[float], float]
    bounds: PlantBounds
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("plant order must be at least 1")


def plant_derivative(m: PlantModel, x, t: float, u: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n,):
        raise ValueError(f"state must have length {m.n}, got shape {x.shape}")
    dx = np.empty(m.n)
    dx[:-1] = x[1:]
    dx[-1] = m.f_nominal(x, t) + m.delta_f(x, t) + m.disturbance(t) + u
    return dx


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _duffing_f(x, t):
    x1, x2 = x[0], x[1]
    return -0.4 * x2 - 1.1 * x1 - x1 ** 3 - 2.1 * math.cos(1.8 * t)


def _duffing_doublewell_f(x, t):
    x1, x2 = x[0], x[1]
    return -0.4 * x2 + 1.1 * x1 - x1 ** 3 + 2.1 * math.cos(1.8 * t)


def _duffing_delta_f(x, t):
    return (math.pi / 6.0) * math.sin(2.0 * math.pi * x[0]) * math.sin(3.0 * math.pi * x[1])


def _duffing_disturbance(t):
    return math.sin(2.0 * t)


def _zero_state(x, t):
    return 0.0


def _zero_time(t):
    return 0.0


def duffing_preset(f_bound: float = DEFAULT_F_BOUND) -> PlantModel:
    """Forced Duffing oscillator with sinusoidal uncertainty and disturbance."""
    return PlantModel(
        n=2,
        f_nominal=_duffing_f,
        delta_f=_duffing_delta_f,
        disturbance=_duffing_disturbance,
        bounds=PlantBounds(F=f_bound, delta_f=math.pi / 6.0, delta_d=1.0),
        name="duffing",
    )


def duffing_doublewell_preset(f_bound: float = DEFAULT_F_BOUND) -> PlantModel:
    """Double-well variant (negative linear stiffness), chaotic from (0.1, 0).

    The hardening single-well ``duffing`` preset settles onto a period-1 orbit;
    this one is kept for free runs that need a genuinely chaotic attractor.
    """
    return PlantModel(
        n=2,
        f_nominal=_duffing_doublewell_f,
        delta_f=_duffing_delta_f,
        disturbance=_duffing_disturbance,
        bounds=PlantBounds(F=f_bound, delta_f=math.pi / 6.0, delta_d=1.0),
        name="duffing-doublewell",
    )


def unforced(m: PlantModel) -> PlantModel:
    """Same nominal dynamics with uncertainty and disturbance removed."""
    return PlantModel(m.n, m.f_nominal, _zero_state, _zero_time,
                      PlantBounds(m.bounds.F, 0.0, 0.0), m.name + "-nominal")


PLANT_PRESETS = {
    "duffing": duffing_preset,
    "duffing-doublewell": duffing_doublewell_preset,
}


# ---------------------------------------------------------------------------
# Custom plants from term lists
#
#   expr   := term (("+" | "-") term)*
#   term   := factor ("*" factor)*
#   factor := NUMBER | "pi" | "x" INT ["^" INT] | ("sin" | "cos") "(" NUMBER ["*"] "t" ")"
#
# e.g. "-0.4*x2 - 1.1*x1 - x1^3 - 2.1*cos(1.8*t)"
# ---------------------------------------------------------------------------

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_FACTOR_RE = re.compile(
    rf"^(?:(?P<num>{_NUM})|(?P<pi>pi)|x(?P<xi>\d+)(?:\^(?P<pow>\d+))?"
    rf"|(?P<trig>sin|cos)\((?P<om>{_NUM})?\*?t\))$"
)


@dataclass(frozen=True)
class Term:
    """``coef * prod(x_i ** powers[i]) * trig(omega * t)``."""

    coef: float
    powers: tuple[int, ...] = ()
    trig: Optional[str] = None
    omega: float = 0.0

    def __call__(self, x, t) -> float:
        v = self.coef
        for xi, p in zip(x, self.powers):
            if p:
                v *= xi ** p
        if self.trig == "sin":
            v *= math.sin(self.omega * t)
        elif self.trig == "cos":
            v *= math.cos(self.omega * t)
        return v


def _split_signed(s: str) -> list[tuple[str, str]]:
    """Split at top-level '+'/'-', leaving exponent signs (``1e-3``) alone."""
    out, depth, cur, sign = [], 0, "", "+"
    for i, ch in enumerate(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        is_exp = i >= 2 and s[i - 1] in "eE" and s[i - 2].isdigit()
        if ch in "+-" and depth == 0 and not is_exp:
            if cur:
                out.append((sign, cur))
            elif i:
                raise ValueError(f"dangling operator in {s!r}")
            sign, cur = ch, ""
        else:
            cur += ch
    if not cur:
        raise ValueError(f"dangling operator in {s!r}")
    out.append((sign, cur))
    return out


def _split_factors(body: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "*" and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return out


def parse_terms(expr: str, n: int) -> tuple[Term, ...]:
    """Parse a sum of polynomial/trigonometric terms over ``x1..xn`` and ``t``."""
    s = expr.replace(" ", "")
    if not s:
        return ()
    terms = []
    for sign, body in _split_signed(s):
        coef = -1.0 if sign == "-" else 1.0
        powers = [0] * n
        trig, omega = None, 0.0
        for fac in _split_factors(body):
            m = _FACTOR_RE.match(fac)
            if m is None:
                raise ValueError(f"bad factor {fac!r} in {expr!r}")
            if m["num"] is not None:
                coef *= float(m["num"])
            elif m["pi"] is not None:
                coef *= math.pi
            elif m["xi"] is not None:
                i = int(m["xi"])
                if not 1 <= i <= n:
                    raise ValueError(f"x{i} out of range for order {n}")
                powers[i - 1] += int(m["pow"] or 1)
            else:
                if trig is not None:
                    raise ValueError(f"at most one trig factor per term: {body!r}")
                trig = m["trig"]
                omega = float(m["om"]) if m["om"] is not None else 1.0
        terms.append(Term(coef, tuple(powers), trig, omega))
    return tuple(terms)


def _sum_terms(terms: Sequence[Term]) -> StateFn:
    terms = tuple(terms)

    def fn(x, t):
        return sum(term(x, t) for term in terms)
    return fn


def custom_plant(n: int, f_expr: str, delta_f_expr: str = "", disturbance_expr: str = "",
                 bounds: Optional[PlantBounds] = None) -> PlantModel:
    f_terms = parse_terms(f_expr, n)
    df_terms = parse_terms(delta_f_expr, n)
    d_terms = parse_terms(disturbance_expr, n)
    if any(any(term.powers) for term in d_terms):
        raise ValueError("disturbance may depend on t only")
    d_fn = _sum_terms(d_terms)
    if bounds is None:
        # sums of pure trig terms are bounded by the sum of |coef|
        def trig_bound(terms):
            if any(any(term.powers) for term in terms):
                return DEFAULT_F_BOUND
            return float(sum(abs(term.coef) for term in terms))
        bounds = PlantBounds(DEFAULT_F_BOUND, trig_bound(df_terms), trig_bound(d_terms))
    zero = np.zeros(n)
    return PlantModel(n, _sum_terms(f_terms), _sum_terms(df_terms),
                      lambda t: d_fn(zero, t), bounds, "custom")


# ---------------------------------------------------------------------------
# Reference
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReferenceSignal:
    """Sum of sines ``amp * sum(c_k sin(w_k t))`` with analytic derivatives."""

    amplitude: float
    coefs: tuple[float, ...]
    freqs: tuple[float, ...]

    def __call__(self, t: float) -> tuple[float, float, float]:
        y = yd = ydd = 0.0
        for c, w in zip(self.coefs, self.freqs):
            sw, cw = math.sin(w * t), math.cos(w * t)
            y += c * sw
            yd += c * w * cw
            ydd -= c * w * w * sw
        a = self.amplitude
        return a * y, a * yd, a * ydd

    def derivatives(self, t: float, order: int) -> list[float]:
        """``[y_d, y_d', ..., y_d^(order)]`` at ``t``."""
        out = [0.0] * (order + 1)
        for c, w in zip(self.coefs, self.freqs):
            for k in range(order + 1):
                out[k] += c * w ** k * math.sin(w * t + k * math.pi / 2)
        return [self.amplitude * v for v in out]

    def y_d(self, t):
        return self(t)[0]

    def y_d_dot(self, t):
        return self(t)[1]

    def y_d_ddot(self, t):
        return self(t)[2]

    def rms(self, t_end: float, n: int = 2, samples: int = 20001) -> tuple[float, ...]:
        """RMS of ``y_d, ..., y_d^(n-1)`` over ``[0, t_end]``."""
        ts = np.linspace(0.0, t_end, samples)
        out = []
        for k in range(n):
            v = np.zeros_like(ts)
            for c, w in zip(self.coefs, self.freqs):
                v += c * w ** k * np.sin(w * ts + k * math.pi / 2)
            out.append(float(abs(self.amplitude) * np.sqrt(np.mean(v ** 2))))
        return tuple(out)


def reference_preset() -> ReferenceSignal:
    return ReferenceSignal(amplitude=math.pi / 3.0, coefs=(1.0, 0.3), freqs=(1.0, 3.0))


def zero_reference() -> ReferenceSignal:
    return ReferenceSignal(amplitude=0.0, coefs=(), freqs=())


# ---------------------------------------------------------------------------
# Measurement noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    snr_db: Optional[float] = None
    seed: int = 0


def noise_std(signal_rms, snr_db: float) -> np.ndarray:
    rms = np.asarray(signal_rms, dtype=float)
    if np.any(~(rms > 0)):
        raise ValueError(f"signal rms must be positive with a finite SNR, got {signal_rms}")
    return rms * 10.0 ** (-snr_db / 20.0)


class MeasurementNoise:
    """Seeded additive white Gaussian noise at a fixed SNR per channel."""

    def __init__(self, spec: NoiseSpec, signal_rms):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self.std = None if spec.snr_db is None else noise_std(signal_rms, spec.snr_db)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.std is None:
            return x.copy()
        return x + self.std * self.rng.standard_normal(x.shape)


def add_measurement_noise(x, spec: NoiseSpec, signal_rms, rng=None) -> np.ndarray:
    """One-shot version of :class:`MeasurementNoise`."""
    x = np.asarray(x, dtype=float)
    if spec.snr_db is None:
        return x.copy()
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    return x + noise_std(signal_rms, spec.snr_db) * rng.standard_normal(x.shape)
