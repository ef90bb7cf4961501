"""Critical INAR(inf) processes built from Poisson thinning."""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import Explosion
from .rng import RngStream
from .walks import LatticeLaw

DEFAULT_EVENT_CAP = 100_000_000


@dataclass(frozen=True)
class InarSpec:
    """Lag weights ``alpha[k-1] = alpha_k`` for ``k = 1..k_max``."""

    alpha: np.ndarray
    target_lambda: float = 1.0
    tail_mass: float = 0.0   # weight cut off by truncating at k_max

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 1 or len(a) < 1:
            raise ValueError("alpha must be a nonempty vector")
        if (a < 0).any() or a.sum() > 1 + 1e-12:
            raise ValueError("alpha must be nonnegative with sum at most 1")
        object.__setattr__(self, "alpha", a)

    @property
    def k_max(self) -> int:
        return len(self.alpha)

    @classmethod
    def power_law(cls, k_max: int, exponent: float = 1.4, target_lambda: float = 1.0):
        """``alpha_k`` proportional to ``k^-exponent``, renormalized to sum 1 on ``k <= k_max``."""
        k = np.arange(1, k_max + 1, dtype=float)
        w = k ** -exponent
        tail = float(special.zeta(exponent, k_max + 1) / special.zeta(exponent, 1))
        return cls(w / w.sum(), target_lambda, tail)


@dataclass
class InarPath:
    X: np.ndarray           # n = -burnin .. N-1
    burnin: int
    prehistory: np.ndarray  # the k_max values before -burnin, oldest first
    events: int
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.X) - self.burnin

    @property
    def observed(self) -> np.ndarray:
        return self.X[self.burnin:]

    def history(self) -> np.ndarray:
        return np.concatenate([self.prehistory, self.X])

    def to_csv(self, spec: InarSpec) -> str:
        u = innovations(self, spec)
        buf = io.StringIO()
        buf.write("n,X,u\n")
        for n, (x, v) in enumerate(zip(self.observed, u)):
            buf.write(f"{n},{int(x)},{v:.17g}\n")
        return buf.getvalue()


def simulate_inar(spec: InarSpec, N: int, burnin: int, stream: RngStream,
                  method: str = "aggregate", prehistory=None,
                  event_cap: int = DEFAULT_EVENT_CAP) -> InarPath:
    """Run the thinning recursion for ``burnin + N`` steps.

    ``method="aggregate"`` draws ``Pois(sum_k alpha_k X_{n-k})`` per step;
    ``method="individual"`` lets each individual draw ``Pois(1)`` children
    with lags from ``alpha`` (scheduled forward).  Both give the same law
    when ``sum alpha = 1``.
    """
    k_max = spec.k_max
    if prehistory is None:
        prehistory = stream.poisson(spec.target_lambda, k_max)
    pre = np.asarray(prehistory, dtype=np.int64)
    if len(pre) != k_max:
        raise ValueError("prehistory must have length k_max")
    T = burnin + N
    if method == "aggregate":
        hist = np.concatenate([pre, np.zeros(T, dtype=np.int64)])
        rev = spec.alpha[::-1].copy()
        events = 0
        for t in range(T):
            i = k_max + t
            lam = float(np.dot(rev, hist[i - k_max:i]))
            x = stream.poisson(lam) if lam > 0 else 0
            hist[i] = x
            events += x
            if events > event_cap:
                raise Explosion(f"more than {event_cap} events by step {t - burnin}")
        X = hist[k_max:]
    elif method == "individual":
        X, events = _simulate_individual(spec, pre, T, stream, event_cap)
    else:
        raise ValueError(f"unknown method {method!r}")
    return InarPath(X, burnin, pre, int(events), {"method": method, "tail_mass": spec.tail_mass})


def _simulate_individual(spec, pre, T, stream, event_cap):
    k_max = spec.k_max
    total = spec.alpha.sum()
    p = spec.alpha / total if total > 0 else spec.alpha
    # slot t + k_max holds step t; children may land up to k_max past the end
    future = np.zeros(T + 2 * k_max + 1, dtype=np.int64)

    def spawn_from(count, t):
        # children of `count` individuals living at step t (t may be negative)
        if count == 0 or total == 0:
            return
        kids = stream.poisson(total, count).sum()
        if kids:
            lags = stream.choice(k_max, size=kids, p=p) + 1
            np.add.at(future, t + lags + k_max, 1)

    for j, c in enumerate(pre):
        spawn_from(int(c), j - k_max)
    X = np.zeros(T, dtype=np.int64)
    events = 0
    for t in range(T):
        X[t] = future[t + k_max]
        events += X[t]
        if events > event_cap:
            raise Explosion(f"more than {event_cap} events by step {t}")
        spawn_from(int(X[t]), t)
    return X, events


def innovations(path: InarPath, spec: InarSpec) -> np.ndarray:
    """``u_n = X_n - sum_k alpha_k X_{n-k}`` for the observed steps ``n >= 0``."""
    hist = path.history().astype(float)
    start = spec.k_max + path.burnin
    cond = np.convolve(hist, np.concatenate([[0.0], spec.alpha]))[start:len(hist)]
    return hist[start:] - cond


def innovation_zscores(us, lags=range(1, 6)):
    """Martingale-difference z-scores pooled over replicate innovation series.

    Returns ``(z_mean, {j: z_j})`` with ``z_mean = sum u / sqrt(sum u^2)`` and
    ``z_j = sum u_n u_{n+j} / sqrt(sum (u_n u_{n+j})^2)``; both are
    asymptotically standard normal when the innovations are uncorrelated.
    """
    num = sum(float(u.sum()) for u in us)
    den = sum(float((u * u).sum()) for u in us)
    z_mean = num / np.sqrt(den) if den > 0 else 0.0
    z = {}
    for j in lags:
        prods = [u[:-j] * u[j:] for u in us if len(u) > j]
        s = sum(float(p.sum()) for p in prods)
        v = sum(float((p * p).sum()) for p in prods)
        z[j] = s / np.sqrt(v) if v > 0 else 0.0
    return z_mean, z


def thinning_counts_check(spec: InarSpec, replications: int, stream: RngStream,
                          z_crit: float = 3.0) -> dict:
    """Poisson thinning: ``K ~ Pois(1)`` lags split into ``xi_k ~ Pois(alpha_k)``.

    Checks the ``K = 0`` convention, the mean of ``xi_1`` and the covariance
    of ``xi_1`` and ``xi_2``.
    """
    total = spec.alpha.sum()
    p = spec.alpha / total
    K = stream.poisson(total, replications)
    lags = stream.choice(spec.k_max, size=int(K.sum()), p=p)
    owner = np.repeat(np.arange(replications), K)
    width = max(spec.k_max, 2)
    xi = np.zeros((replications, width), dtype=np.int64)
    np.add.at(xi, (owner, lags), 1)
    zero_ok = bool((xi[K == 0] == 0).all())
    x1, x2 = xi[:, 0].astype(float), xi[:, 1].astype(float)
    a1 = spec.alpha[0]
    se1 = x1.std(ddof=1) / np.sqrt(replications)
    z_mean = (x1.mean() - a1) / se1 if se1 > 0 else 0.0
    d = (x1 - x1.mean()) * (x2 - x2.mean())
    cov = d.mean()
    se_cov = d.std(ddof=1) / np.sqrt(replications)
    z_cov = cov / se_cov if se_cov > 0 else 0.0
    return {
        "replications": replications,
        "zero_convention": zero_ok,
        "mean_xi1": float(x1.mean()), "alpha1": float(a1), "z_mean": float(z_mean),
        "cov_xi1_xi2": float(cov), "z_cov": float(z_cov),
        "passed": bool(zero_ok and abs(z_mean) <= z_crit and abs(z_cov) <= z_crit),
    }


def symmetrized_lattice_step(spec: InarSpec) -> LatticeLaw:
    """``p_k = sum_l alpha_l alpha_{k+l}`` on ``k = -(k_max-1) .. k_max-1``."""
    a = spec.alpha
    p = np.correlate(a, a, mode="full")
    p = 0.5 * (p + p[::-1])
    return LatticeLaw(-(len(a) - 1), p)
