"""Deterministic lattice calculus for renewal-type measures.

A :class:`GridMeasure` stores a nonnegative measure on the lattice ``h * Z``.
Lattice point ``k`` carries the mass of the cell ``((k - 1/2) h, (k + 1/2) h]``
(midpoint assignment), except that an exact atom at the origin is kept apart
in ``atom0``.  Sums of lattice points are lattice points, so convolution is
exact lattice convolution and point masses on the grid stay point masses.

Everything here is pure numerics and serves as the oracle for the Monte
Carlo modules.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .distributions import DisplacementSpec
from .errors import Divergent, StepMismatch

# Below this many multiply-adds the direct O(nm) convolution is used.
DIRECT_CONV_LIMIT = 200_000
CAUCHY_TOL = 1e-6
CAUCHY_TERMS = 10


@dataclass
class GridMeasure:
    h: float
    offset: int
    masses: np.ndarray
    atom0: float = 0.0
    truncated_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if self.h <= 0:
            raise ValueError("grid step must be positive")

    # -- construction -------------------------------------------------
    @classmethod
    def zero(cls, h):
        return cls(h, 0, np.zeros(0))

    @classmethod
    def delta(cls, x, h, mass=1.0):
        k = int(round(x / h))
        if abs(k * h - x) > 1e-9 * max(h, abs(x)):
            raise ValueError(f"{x} is not a lattice point of step {h}")
        if k == 0:
            return cls(h, 0, np.zeros(0), atom0=mass)
        return cls(h, k, np.array([mass]))

    @classmethod
    def from_spec(cls, spec, h, x_max):
        """Discretize a law on ``[0, inf)`` onto lattice points ``0 .. x_max``."""
        n = int(round(x_max / h))
        edges = (np.arange(n + 1) + 0.5) * h
        cdf_edges = np.asarray(spec.cdf(edges), dtype=float)
        at_zero = float(spec.cdf(0.0))
        masses = np.diff(np.concatenate([[at_zero], cdf_edges]))
        masses = np.maximum(masses, 0.0)
        tail = max(0.0, 1.0 - float(cdf_edges[-1]))
        g = cls(h, 0, masses, atom0=at_zero, truncated_mass=tail)
        g.meta["source"] = spec.to_kv() if isinstance(spec, DisplacementSpec) else repr(spec)
        return g

    # -- geometry ------------------------------------------------------
    @property
    def k_lo(self):
        return self.offset

    @property
    def k_hi(self):
        return self.offset + len(self.masses) - 1

    @property
    def positions(self):
        return (self.offset + np.arange(len(self.masses))) * self.h

    @property
    def total_mass(self):
        return float(self.masses.sum()) + self.atom0

    def dense(self, k_lo, k_hi):
        """Lattice masses on ``k_lo..k_hi`` (atom excluded), zero padded."""
        out = np.zeros(k_hi - k_lo + 1)
        lo = max(k_lo, self.k_lo)
        hi = min(k_hi, self.k_hi)
        if hi >= lo:
            out[lo - k_lo:hi - k_lo + 1] = self.masses[lo - self.k_lo:hi - self.k_lo + 1]
        return out

    def restrict(self, k_lo, k_hi):
        """Keep lattice points ``k_lo..k_hi``; dropped mass goes to truncated_mass."""
        kept = self.dense(k_lo, k_hi)
        dropped = float(self.masses.sum() - kept.sum())
        atom = self.atom0 if k_lo <= 0 <= k_hi else 0.0
        dropped += self.atom0 - atom
        out = GridMeasure(self.h, k_lo, kept, atom, self.truncated_mass + max(dropped, 0.0),
                          dict(self.meta))
        return out

    def reflect(self):
        """Image under ``x -> -x``."""
        return GridMeasure(self.h, -self.k_hi, self.masses[::-1].copy(), self.atom0,
                           self.truncated_mass, dict(self.meta))

    def lattice(self, k_lo, k_hi):
        """Masses with the atom folded into lattice point 0."""
        out = self.dense(k_lo, k_hi)
        if k_lo <= 0 <= k_hi:
            out[-k_lo] += self.atom0
        return out

    def __add__(self, other):
        _check_step(self, other)
        k_lo, k_hi = min(self.k_lo, other.k_lo), max(self.k_hi, other.k_hi)
        return GridMeasure(self.h, k_lo, self.dense(k_lo, k_hi) + other.dense(k_lo, k_hi),
                           self.atom0 + other.atom0, self.truncated_mass + other.truncated_mass)

    def scaled(self, c):
        return GridMeasure(self.h, self.offset, c * self.masses, c * self.atom0,
                           c * self.truncated_mass, dict(self.meta))

    def minus_delta0(self):
        return GridMeasure(self.h, self.offset, self.masses.copy(), self.atom0 - 1.0,
                           self.truncated_mass, dict(self.meta))

    # -- queries -------------------------------------------------------
    def cumulative(self, x):
        """``G([0, x])`` for one-sided measures (``G((-inf, x])`` in general)."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        csum = np.concatenate([[0.0], np.cumsum(self.masses)])
        k = np.floor(xs / self.h + 1e-9).astype(np.int64)
        idx = np.clip(k - self.k_lo + 1, 0, len(self.masses))
        out = csum[idx] + np.where(xs >= 0, self.atom0, 0.0)
        return out if np.ndim(x) else float(out[0])

    def mass_between(self, a, b):
        """Mass of ``[a, b)`` with half weight on lattice points at the endpoints.

        The atom at 0 counts fully when ``a <= 0 < b``.
        """
        pos = self.positions
        tol = 1e-9 * self.h
        inside = (pos > a + tol) & (pos < b - tol)
        edge = (np.abs(pos - a) <= tol) | (np.abs(pos - b) <= tol)
        total = self.masses[inside].sum() + 0.5 * self.masses[edge].sum()
        if a <= 0 < b:
            total += self.atom0
        return float(total)

    def unit_cells(self, lo, hi, width=1.0):
        edges = np.arange(lo, hi + 0.5 * width, width)
        return edges[:-1], np.array([self.mass_between(a, a + width) for a in edges[:-1]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# h={self.h!r} x_lo={self.k_lo * self.h!r} x_hi={self.k_hi * self.h!r} "
                  f"truncated_mass={self.truncated_mass!r} atom0={self.atom0!r}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "mass"])
        lattice = self.lattice(self.k_lo, self.k_hi) if len(self.masses) else np.array([self.atom0])
        xs = (self.k_lo + np.arange(len(lattice))) * self.h if len(self.masses) else [0.0]
        for x, m in zip(xs, lattice):
            writer.writerow([repr(float(x)), repr(float(m))])
        return buf.getvalue()


def _check_step(a, b):
    if a.h != b.h:
        raise StepMismatch(f"grid steps differ: {a.h} vs {b.h}")


def _raw_conv(x, y):
    if len(x) == 0 or len(y) == 0:
        return np.zeros(0)
    # canonical operand order keeps convolve(a, b) == convolve(b, a) bitwise
    if (len(x), x.tobytes()) > (len(y), y.tobytes()):
        x, y = y, x
    if len(x) * len(y) <= DIRECT_CONV_LIMIT:
        return np.convolve(x, y)
    return np.maximum(fftconvolve(x, y), 0.0)


def convolve(a: GridMeasure, b: GridMeasure, out_range=None) -> GridMeasure:
    """Lattice convolution, optionally restricted to ``out_range = (k_lo, k_hi)``.

    Atom cross terms are included; ``truncated_mass`` accumulates both the
    inputs' missing mass and whatever the range restriction drops, so that
    ``total + truncated`` of the result equals the product of the inputs'.
    """
    _check_step(a, b)
    core = _raw_conv(a.masses, b.masses)
    pieces = []
    if len(core):
        pieces.append((a.k_lo + b.k_lo, core))
    if len(b.masses) and a.atom0:
        pieces.append((b.k_lo, a.atom0 * b.masses))
    if len(a.masses) and b.atom0:
        pieces.append((a.k_lo, b.atom0 * a.masses))
    if pieces:
        k_lo = min(p[0] for p in pieces)
        k_hi = max(p[0] + len(p[1]) - 1 for p in pieces)
        dense = []
        for start, vals in pieces:
            d = np.zeros(k_hi - k_lo + 1)
            d[start - k_lo:start - k_lo + len(vals)] = vals
            dense.append(d)
        masses = dense[0]
        if len(dense) == 3:
            # (x + y) is commutative in IEEE arithmetic, so swapping a and b is exact
            masses = masses + (dense[1] + dense[2])
        elif len(dense) == 2:
            masses = masses + dense[1]
    else:
        k_lo, masses = 0, np.zeros(0)
    inherited = (a.truncated_mass * (b.total_mass + b.truncated_mass)
                 + b.truncated_mass * a.total_mass)
    out = GridMeasure(a.h, k_lo, masses, a.atom0 * b.atom0, inherited)
    if out_range is not None:
        out = out.restrict(*out_range)
    return out


def _series_inverse(a: np.ndarray, n: int) -> np.ndarray:
    """First ``n`` coefficients of ``1 / a(z)`` (requires ``a[0] != 0``)."""
    a = np.asarray(a, dtype=float)
    a = np.concatenate([a[:n], np.zeros(max(0, n - len(a)))])
    n0 = min(n, 256)
    g = np.zeros(n0)
    g[0] = 1.0 / a[0]
    for j in range(1, n0):
        g[j] = -np.dot(a[1:j + 1], g[j - 1::-1]) / a[0]
    k = n0
    while k < n:
        k2 = min(2 * k, n)
        prod = fftconvolve(a[:k2], g)[k:k2]
        corr = fftconvolve(g[:k2 - k], prod)[:k2 - k]
        g = np.concatenate([g, -corr])
        k = k2
    return g


def renewal_function(F: GridMeasure, x_max: float) -> GridMeasure:
    """Renewal measure ``U = sum_g F^{g*}`` on ``[0, x_max]``.

    Solves ``U = delta_0 + F * U`` by power-series inversion of ``1 - F``.
    """
    if F.k_lo < 0:
        raise ValueError("renewal_function needs a law on [0, inf)")
    n = int(round(x_max / F.h)) + 1
    f = F.lattice(0, n - 1)
    if f[0] >= 1.0:
        raise Divergent("F has all of its mass at the origin")
    a = -f
    a[0] += 1.0
    t = _series_inverse(a, n)
    t = np.maximum(t, 0.0)
    atom = 1.0 / (1.0 - F.atom0)
    masses = t.copy()
    masses[0] = max(masses[0] - atom, 0.0)
    out = GridMeasure(F.h, 0, masses, atom, 0.0)
    out.meta["input_tail_mass"] = F.truncated_mass
    return out


def renewal_residual(U: GridMeasure, F: GridMeasure) -> np.ndarray:
    """Per-cell residual ``U - delta_0 - F * U`` on U's range."""
    FU = convolve(F, U, out_range=(U.k_lo, U.k_hi))
    res = U.lattice(U.k_lo, U.k_hi) - FU.lattice(U.k_lo, U.k_hi)
    res[-U.k_lo] -= 1.0
    return res


def two_index_mean(F1: GridMeasure, F2: GridMeasure, x_max: float) -> GridMeasure:
    """Mean measure ``U1 * U2`` of renewal immigration with critical families."""
    _check_step(F1, F2)
    U1 = renewal_function(F1, x_max)
    U2 = renewal_function(F2, x_max)
    n = int(round(x_max / F1.h))
    out = convolve(U1, U2, out_range=(0, n))
    out.meta.update(input_tail_mass=(F1.truncated_mass, F2.truncated_mass))
    return out


def laplace(G: GridMeasure, s: float) -> float:
    """Laplace-Stieltjes transform ``sum exp(-s x) G(dx)`` over the stored lattice."""
    if s <= 0:
        raise ValueError("s must be positive")
    return float(G.atom0 + np.dot(np.exp(-s * G.positions), G.masses))


def loglog_slope(G: GridMeasure, x_lo: float, x_hi: float, points: int = 40) -> float:
    """Least-squares slope of ``log G([0, x])`` against ``log x`` on ``[x_lo, x_hi]``."""
    xs = np.geomspace(x_lo, x_hi, points)
    ys = G.cumulative(xs)
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def step_halving(build, h):
    """Run ``build(h)`` and ``build(h / 2)``; return both values and the relative change."""
    v1 = build(h)
    v2 = build(h / 2)
    return v1, v2, abs(v2 - v1) / abs(v1)


@dataclass
class PalmResult:
    measure: GridMeasure
    utilde_terms: int
    utilde_window_mass: float
    last_term_mass: float


def symmetrized_grid(F: GridMeasure, k_max=None) -> GridMeasure:
    """``F_- * F``: the law of ``X1 - X2`` on the lattice, exactly symmetric."""
    Ft = convolve(F.reflect(), F)
    if k_max is not None:
        Ft = Ft.restrict(-k_max, k_max)
    return _symmetrize(Ft)


def _symmetrize(G: GridMeasure) -> GridMeasure:
    k = max(-G.k_lo, G.k_hi)
    m = G.dense(-k, k)
    m = 0.5 * (m + m[::-1])
    return GridMeasure(G.h, -k, m, G.atom0, G.truncated_mass, dict(G.meta))


def walk_mean_measure(Ft: GridMeasure, k_range: int, window: int, tol=CAUCHY_TOL,
                      max_doublings=24):
    """Partial sums of ``sum_g Ft^{g*}`` on lattice ``[-k_range, k_range]``.

    Blocks of terms are added by doubling, ``S_2n = S_n + Ft^{n*} * S_n``.  The
    sum is accepted once ``CAUCHY_TERMS`` times the current term's mass on the
    lattice window ``[-window, window]`` is below ``tol``; otherwise
    :class:`Divergent` is raised after ``max_doublings``.
    """
    S = GridMeasure(Ft.h, 0, np.zeros(0), atom0=1.0)
    P = Ft.restrict(-k_range, k_range)
    n = 1
    for _ in range(max_doublings + 1):
        term = P.lattice(-window, window).sum()
        if CAUCHY_TERMS * term <= tol:
            return _symmetrize(S), n, term
        S = S + convolve(P, S, out_range=(-k_range, k_range))
        P = convolve(P, P, out_range=(-k_range, k_range))
        n *= 2
    raise Divergent(f"walk mean measure partial sums not Cauchy after {n} terms "
                    f"(term mass {term:.3g} on the window)")


def palm_mean_measure(F: GridMeasure, x_max: float, half_width: float = 10.0,
                      tol=CAUCHY_TOL, max_doublings=24) -> PalmResult:
    """Two-sided mean measure ``Ut * (U + U_- - delta_0)`` on ``[-half_width, half_width]``."""
    h = F.h
    n = int(round(x_max / h))
    r = int(round(half_width / h))
    Fc = F.restrict(0, n)
    U = renewal_function(Fc, x_max)
    V = U + U.reflect().minus_delta0()
    Ft = symmetrized_grid(Fc, k_max=n)
    window = max(r, int(round(1.0 / h)))
    Ut, terms, last = walk_mean_measure(Ft, n + r, window, tol=tol, max_doublings=max_doublings)
    U0 = _symmetrize(convolve(Ut, V, out_range=(-r, r)))
    U0.atom0 = Ut.atom0 * V.atom0
    U0.meta.update(x_max=x_max, input_tail_mass=F.truncated_mass, utilde_terms=terms)
    return PalmResult(U0, terms, float(Ut.lattice(-window, window).sum()), last)


def generation_sums(F: GridMeasure, g_max: int, k_max: int) -> GridMeasure:
    """``sum_{g <= g_max} F^{g*}`` by repeated convolution on ``[0, k_max]``."""
    term = GridMeasure(F.h, 0, np.zeros(0), atom0=1.0)
    total = term
    Fr = F.restrict(min(F.k_lo, 0), k_max)
    for _ in range(g_max):
        term = convolve(term, Fr, out_range=(0, k_max))
        total = total + term
    return total


def palm_double_sum(F: GridMeasure, x_max: float, g_max: int = 50,
                    half_width: float = 10.0) -> GridMeasure:
    """``sum_{g, g' <= g_max} F_-^{g*} * F^{g'*}`` on ``[-half_width, half_width]``."""
    n = int(round(x_max / F.h))
    r = int(round(half_width / F.h))
    Ug = generation_sums(F, g_max, n)
    out = _symmetrize(convolve(Ug.reflect(), Ug, out_range=(-r, r)))
    out.meta.update(g_max=g_max, x_max=x_max)
    return out


@dataclass
class ScanEntry:
    alpha: float
    x_maxes: tuple
    values: tuple
    exponent: float
    label: str


def palm_local_finiteness_scan(alpha_list, x_maxes=(1e2, 1e3, 1e4), h=0.1, x_m=1.0,
                               threshold=0.1):
    """Classify ``U0([0, 1])`` as bounded or growing as the grid range grows.

    The increments ``d_i`` of ``U0([0, 1])`` between successive ranges are
    compared on a log scale: ``exponent = log(d2 / d1) / log(x3 / x2)``.
    Shrinking increments (exponent below ``-threshold``) mean bounded,
    growing ones (above ``threshold``) mean growing; otherwise inconclusive.
    """
    entries = []
    for alpha in alpha_list:
        F = GridMeasure.from_spec(DisplacementSpec.pareto(alpha, x_m), h, max(x_maxes))
        values = []
        for xm in x_maxes:
            res = palm_mean_measure(F, xm, half_width=1.0)
            values.append(res.measure.mass_between(0.0, 1.0 + 1e-12))
        d = np.diff(values)
        if len(d) >= 2 and d[-2] > 0 and d[-1] > 0:
            exponent = math.log(d[-1] / d[-2]) / math.log(x_maxes[-1] / x_maxes[-2])
        else:
            exponent = -math.inf if len(d) and d[-1] <= 0 else math.nan
        if exponent < -threshold:
            label = "bounded"
        elif exponent > threshold:
            label = "growing"
        else:
            label = "inconclusive"
        entries.append(ScanEntry(alpha, tuple(x_maxes), tuple(values), exponent, label))
    return entries
