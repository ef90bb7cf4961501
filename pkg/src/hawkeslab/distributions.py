"""Displacement distribution families and the derived objects built on them.

Four parametric families live on ``[0, inf)``: ``pareto`` (heavy tail of
index ``alpha``), ``exponential``, ``deterministic`` and ``uniform``.  The
last three have finite mean and act as controls.  On top of a base family
we provide the truncated law ``F_c`` (mass above ``c`` moved to an atom at
zero), its mean ``mu(c)`` and generalized inverse, and the law of
``X1 - X2``.

Two tail normalizations appear for regularly varying tails.  With
``1 - F(x) ~ c * x**-alpha``:

* ``laplace_constant``  ``l = c * Gamma(1 - alpha)``, the constant with
  ``1 - F_hat(s) ~ s**alpha * l``; renewal asymptotics are stated in it,
  ``U(x) ~ x**alpha / (l * Gamma(1 + alpha))``.
* ``gamma_plus_constant``  ``c * Gamma(1 + alpha)``, the normalization
  obtained by reading the tail as ``l / (x**alpha * Gamma(1 + alpha))``.

Both are exposed; the renewal oracle uses the Laplace one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate

from .errors import ConfigInvalid, UnreachableLevel
from .rng import RngStream

FAMILIES = ("pareto", "exponential", "deterministic", "uniform")

# Relative bisection tolerance for mu_inverse.
MU_INVERSE_RTOL = 1e-9


@dataclass(frozen=True)
class DisplacementSpec:
    """A displacement law on ``[0, inf)``.

    Only the parameters of ``family`` are meaningful; the others stay None.
    """

    family: str
    alpha: Optional[float] = None
    x_m: Optional[float] = None
    rate: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    label: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigInvalid("family", f"unknown family {self.family!r}")
        if self.family == "pareto":
            if self.alpha is None or not 0 < self.alpha <= 1:
                raise ConfigInvalid("alpha", "pareto tail index must lie in (0, 1]")
            if self.x_m is None or self.x_m <= 0:
                raise ConfigInvalid("x_m", "pareto scale must be positive")
        elif self.family == "exponential":
            if self.rate is None or self.rate <= 0:
                raise ConfigInvalid("rate", "exponential rate must be positive")
        elif self.family == "deterministic":
            if self.a is None or self.a <= 0:
                raise ConfigInvalid("a", "deterministic displacement must be positive")
        else:
            if self.a is None or self.b is None or not 0 <= self.a < self.b:
                raise ConfigInvalid("a", "uniform needs 0 <= a < b")

    # -- constructors -------------------------------------------------
    @classmethod
    def pareto(cls, alpha, x_m=1.0, label=""):
        return cls("pareto", alpha=float(alpha), x_m=float(x_m), label=label)

    @classmethod
    def exponential(cls, rate=1.0, label=""):
        return cls("exponential", rate=float(rate), label=label)

    @classmethod
    def deterministic(cls, a=1.0, label=""):
        return cls("deterministic", a=float(a), label=label)

    @classmethod
    def uniform(cls, a, b, label=""):
        return cls("uniform", a=float(a), b=float(b), label=label)

    # -- basic functions ----------------------------------------------
    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "pareto":
            with np.errstate(divide="ignore"):
                out = 1.0 - (self.x_m / np.maximum(x, self.x_m)) ** self.alpha
            return np.where(x >= self.x_m, out, 0.0)
        if self.family == "exponential":
            return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)
        if self.family == "deterministic":
            return np.where(x >= self.a, 1.0, 0.0)
        return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "pareto":
            return np.where(x >= self.x_m, (self.x_m / np.maximum(x, self.x_m)) ** self.alpha, 1.0)
        if self.family == "exponential":
            return np.exp(-self.rate * np.maximum(x, 0.0))
        return 1.0 - self.cdf(x)

    @property
    def has_density(self) -> bool:
        return self.family != "deterministic"

    def pdf(self, x):
        if not self.has_density:
            raise ValueError("deterministic displacement has no density")
        x = np.asarray(x, dtype=float)
        if self.family == "pareto":
            safe = np.maximum(x, self.x_m)
            return np.where(
                x >= self.x_m, self.alpha * self.x_m**self.alpha * safe ** (-self.alpha - 1.0), 0.0
            )
        if self.family == "exponential":
            return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)

    @property
    def support_start(self) -> float:
        """Left end of the support; the density is nonincreasing beyond it."""
        return {"pareto": self.x_m, "exponential": 0.0,
                "deterministic": self.a, "uniform": self.a}[self.family]

    @property
    def scale(self) -> float:
        return {"pareto": self.x_m, "exponential": 1.0 / (self.rate or 1.0),
                "deterministic": self.a, "uniform": self.b}[self.family]

    @property
    def mean(self) -> float:
        if self.family == "pareto":
            return math.inf
        if self.family == "exponential":
            return 1.0 / self.rate
        if self.family == "deterministic":
            return self.a
        return 0.5 * (self.a + self.b)

    @property
    def tail_index(self) -> Optional[float]:
        return self.alpha if self.family == "pareto" else None

    def sample(self, stream: RngStream, size=None):
        if self.family == "pareto":
            # inverse cdf on (0, 1]; 1 - U avoids a zero base
            u = 1.0 - stream.random(size)
            return self.x_m * u ** (-1.0 / self.alpha)
        if self.family == "exponential":
            return stream.exponential(1.0 / self.rate, size)
        if self.family == "deterministic":
            return np.full(size, self.a) if size is not None else self.a
        return stream.uniform(self.a, self.b, size)

    # -- serialization ------------------------------------------------
    def to_kv(self) -> str:
        keys = {"pareto": ("alpha", "x_m"), "exponential": ("rate",),
                "deterministic": ("a",), "uniform": ("a", "b")}[self.family]
        parts = [f"family={self.family}"] + [f"{k}={getattr(self, k)!r}" for k in keys]
        if self.label:
            parts.append(f"label={self.label}")
        return " ".join(parts)

    @classmethod
    def from_kv(cls, text: str) -> "DisplacementSpec":
        fields_ = {}
        for token in text.split():
            if "=" not in token:
                raise ConfigInvalid("displacement", f"malformed token {token!r}")
            key, value = token.split("=", 1)
            fields_[key.strip()] = value.strip()
        family = fields_.pop("family", None)
        if family is None:
            raise ConfigInvalid("displacement", "missing family=")
        label = fields_.pop("label", "")
        allowed = {"alpha", "x_m", "rate", "a", "b"}
        unknown = set(fields_) - allowed
        if unknown:
            raise ConfigInvalid("displacement", f"unknown keys {sorted(unknown)}")
        try:
            params = {k: float(v) for k, v in fields_.items()}
        except ValueError as exc:
            raise ConfigInvalid("displacement", str(exc)) from None
        return cls(family, label=label, **params)


@dataclass(frozen=True)
class TruncatedSpec:
    """Law of ``1{X <= c} X``: the mass above ``c`` sits as an atom at 0."""

    base: DisplacementSpec
    c: float

    def __post_init__(self):
        if self.c < 0:
            raise ConfigInvalid("c", "truncation level must be nonnegative")

    @property
    def atom_at_zero(self) -> float:
        return float(self.base.sf(self.c)) + float(self.base.cdf(0.0))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        inner = self.base.cdf(np.minimum(x, self.c))
        return np.where(x >= 0, self.base.sf(self.c) + inner, 0.0)

    @property
    def mean(self) -> float:
        return truncated_mean(self.base, self.c)

    def sample(self, stream: RngStream, size=None):
        x = self.base.sample(stream, size)
        return np.where(x <= self.c, x, 0.0) if size is not None else (x if x <= self.c else 0.0)


@dataclass(frozen=True)
class SymmetrizedSpec:
    """Law of ``X1 - X2`` with ``X1, X2`` iid from ``base``."""

    base: DisplacementSpec

    def sample(self, stream: RngStream, size=None):
        x1 = self.base.sample(stream, size)
        x2 = self.base.sample(stream, size)
        return x1 - x2

    def cdf(self, x):
        """``P[X1 - X2 <= x] = E F(x + X2)``, by quadrature."""
        base = self.base
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if base.family == "deterministic":
            out = np.where(xs >= 0, 1.0, 0.0)
        else:
            lo, hi = base.support_start, (base.b if base.family == "uniform" else np.inf)
            out = np.array([
                integrate.quad(lambda y, xv=xv: float(base.cdf(xv + y) * base.pdf(y)),
                               lo, hi, limit=200, epsabs=1e-11)[0]
                for xv in xs
            ])
        return out if np.ndim(x) else float(out[0])


AnySpec = Union[DisplacementSpec, TruncatedSpec, SymmetrizedSpec]


def cdf(spec: AnySpec, x):
    return spec.cdf(x)


def sample(spec: AnySpec, stream: RngStream, size=None):
    return spec.sample(stream, size)


def truncated_mean(spec: DisplacementSpec, c: float) -> float:
    """``mu(c) = E[X; X <= c]`` in closed form."""
    if c < 0:
        return 0.0
    if spec.family == "pareto":
        if c < spec.x_m:
            return 0.0
        al, xm = spec.alpha, spec.x_m
        if al == 1.0:
            return xm * math.log(c / xm)
        return al * xm**al * (c ** (1.0 - al) - xm ** (1.0 - al)) / (1.0 - al)
    if spec.family == "exponential":
        r = spec.rate
        return (1.0 - math.exp(-r * c) * (1.0 + r * c)) / r
    if spec.family == "deterministic":
        return spec.a if c >= spec.a else 0.0
    top = min(c, spec.b)
    if top <= spec.a:
        return 0.0
    return (top**2 - spec.a**2) / (2.0 * (spec.b - spec.a))


def mu_inverse(spec: DisplacementSpec, y: float, rtol: float = MU_INVERSE_RTOL) -> float:
    """Generalized inverse ``inf{c >= 0 : mu(c) >= y}`` by bisection."""
    if y < 0:
        raise ValueError("level must be nonnegative")
    if y == 0:
        return 0.0
    top = spec.mean
    if math.isfinite(top) and (y > top or (y == top and spec.family == "exponential")):
        raise UnreachableLevel(f"level {y} exceeds sup mu = {top} for {spec.family}")
    lo, hi = 0.0, max(spec.scale, 1e-12)
    expansions = 0
    while truncated_mean(spec, hi) < y:
        lo, hi = hi, 2.0 * hi
        expansions += 1
        if expansions > 2000 or not math.isfinite(hi):
            raise UnreachableLevel(f"level {y} not reached in floating point")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if truncated_mean(spec, mid) >= y:
            hi = mid
        else:
            lo = mid
    return hi


def branching_to_truncation(spec: DisplacementSpec, m: float) -> float:
    """Truncation level ``c(m)`` giving mean interarrival ``1 / (1 - m)``."""
    if not 0 <= m < 1:
        raise ValueError("branching coefficient must lie in [0, 1)")
    return mu_inverse(spec, 1.0 / (1.0 - m))


def bm_tail_constants(spec: DisplacementSpec):
    """``(lim f(x) x^(1+a), sup f(x) x^(1+a))``, or None for light tails."""
    if spec.family != "pareto":
        return None
    value = spec.alpha * spec.x_m**spec.alpha
    return value, value


# -- tail normalizations ----------------------------------------------

def tail_constant(spec: DisplacementSpec) -> float:
    """``c`` in ``1 - F(x) = c x^-alpha`` (exact for x >= x_m)."""
    _require_pareto(spec)
    return spec.x_m**spec.alpha


def laplace_constant(spec: DisplacementSpec) -> float:
    """``l`` with ``1 - F_hat(s) ~ l s^alpha`` as ``s -> 0``."""
    _require_pareto(spec)
    if spec.alpha >= 1:
        raise ValueError("the Laplace constant is not constant for alpha = 1")
    return tail_constant(spec) * math.gamma(1.0 - spec.alpha)


def gamma_plus_constant(spec: DisplacementSpec) -> float:
    """``c * Gamma(1 + alpha)``: the tail read as ``l / (x^a Gamma(1 + a))``."""
    _require_pareto(spec)
    return tail_constant(spec) * math.gamma(1.0 + spec.alpha)


def pareto_with_laplace_constant(alpha: float, ell: float, label: str = "") -> DisplacementSpec:
    """Pareto law whose Laplace constant equals ``ell``."""
    c = ell / math.gamma(1.0 - alpha)
    return DisplacementSpec.pareto(alpha, c ** (1.0 / alpha), label=label)


def _require_pareto(spec):
    if spec.family != "pareto":
        raise ValueError("tail constants are defined for the pareto family only")


@dataclass(frozen=True)
class TailSpec:
    """Regularly varying tail with constant slowly varying part.

    ``ell`` is the Laplace-side constant: ``1 - F_hat(s) ~ s^alpha ell``.
    """

    alpha: float
    ell: float = 1.0

    def to_pareto(self) -> DisplacementSpec:
        return pareto_with_laplace_constant(self.alpha, self.ell)

    def renewal_asymptote(self, x):
        return np.asarray(x, dtype=float) ** self.alpha / (self.ell * math.gamma(1.0 + self.alpha))
