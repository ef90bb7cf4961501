"""Experiment kinds: one replicate function and one summary function each.

A replicate receives the typed parameters and its own stream and returns a
JSON-ready dict.  A summary receives the replicates in index order and
returns ``(summary, artifacts)`` where artifacts map file names to text.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import asdict

import numpy as np
from scipy import stats

from .. import cluster, embedding, genealogy, hawkes_sim, inar, renewal_calc, walks
from ..distributions import SymmetrizedSpec, TailSpec
from ..rng import split_stream
from .stats import estimate_intensity, mean_se


def _ms(values, prefix):
    m, s = mean_se(values)
    return {f"{prefix}": m, f"{prefix}_se": s}


# cluster_iterate -----------------------------------------------------------

def cluster_replicate(p, stream):
    fld = cluster.ClusterField(p["displacement"], p["m"])
    cfg = cluster.iterate_generations(p["eta"], fld, p["g_max"], p["window"], p["buffer"],
                                      stream, p["point_cap"])
    lam, se = estimate_intensity(cfg, blocks=p["blocks"])
    L = cfg.window_length
    return {"lambda_hat": lam, "bootstrap_se": se, "count": cfg.count(),
            "generation_intensity": [c / L for c in cfg.meta["generation_counts"]],
            "escaped_mass_bound": cfg.meta["escaped_mass_bound"]}


def cluster_summary(p, reps):
    lam = [r["lambda_hat"] for r in reps]
    target = p["eta"] / (1 - p["m"]) if p["m"] < 1 else math.inf
    out = {"target": target, **_ms(lam, "lambda_hat"),
           "escaped_mass_bound": reps[0]["escaped_mass_bound"]}
    gi = np.array([r["generation_intensity"] for r in reps])
    out["generation_intensity"] = gi.mean(axis=0).tolist()
    return out, {}


# renewal_hawkes ------------------------------------------------------------

def renewal_replicate(p, stream):
    spec = hawkes_sim.RenewalImmigrationSpec(
        p["displacement"], p["m"], p["target_lambda"], p["horizon"],
        None if p["burnin"] < 0 else p["burnin"], p["family_budget"])
    cfg = hawkes_sim.simulate_renewal_hawkes(spec, stream)
    lam, se = estimate_intensity(cfg, blocks=p["blocks"])
    return {"lambda_hat": lam, "bootstrap_se": se,
            "immigrant_rate": cfg.meta["n_immigrants_window"] / p["horizon"],
            "censored_families": cfg.meta["censored_families"],
            "burnin": cfg.meta["burnin"], "c": cfg.meta["c"]}


def renewal_summary(p, reps):
    out = {"target": p["target_lambda"],
           "immigrant_target": (1 - p["m"]) * p["target_lambda"],
           **_ms([r["lambda_hat"] for r in reps], "lambda_hat"),
           **_ms([r["immigrant_rate"] for r in reps], "immigrant_rate"),
           "censored_families": int(sum(r["censored_families"] for r in reps)),
           "burnin": reps[0]["burnin"], "c": reps[0]["c"]}
    return out, {}


# two_index -----------------------------------------------------------------

def two_index_specs(p):
    F1 = TailSpec(p["alpha1"], p["ell1"]).to_pareto()
    F2 = TailSpec(p["alpha2"], p["ell2"]).to_pareto()
    return F1, F2


def two_index_replicate(p, stream):
    F1, F2 = two_index_specs(p)
    cfg = hawkes_sim.simulate_two_index(
        hawkes_sim.TwoIndexSpec(F1, F2, p["horizon"], p["family_budget"]), stream)
    return {"ratio": cfg.count() / p["horizon"], "epochs": int(len(cfg.meta["epochs"])),
            "censored_families": cfg.meta["censored_families"]}


def two_index_summary(p, reps):
    ratios = [r["ratio"] for r in reps]
    out = {**_ms(ratios, "ratio"), "ratio_median": float(np.median(ratios)),
           "censored_families": int(sum(r["censored_families"] for r in reps)),
           "lambda_limit": 1.0 / (p["ell1"] * p["ell2"])
           if abs(p["alpha1"] + p["alpha2"] - 1) < 1e-12 else 0.0}
    return out, {}


# embedding -----------------------------------------------------------------

def embedding_replicate(p, stream, seed=0, index=0):
    st = embedding.init_embedding(p["lambda"], p["displacement"], p["window"], p["buffer"],
                                  stream, p["boundary"], height_cap=p["height_cap"])
    rep = embedding.run_embedding(st, p["g_max"], p["inner_window"], seed, p["stable_run"], index)
    return {"records": rep.records, "stabilized": rep.stabilized,
            "stabilized_at": rep.stabilized_at,
            "escaped_mass_bound": st.meta["escaped_mass_bound"]}


def embedding_summary(p, reps):
    L = p["inner_window"][1] - p["inner_window"][0]
    counts = np.array([[r["count"] for r in rep["records"]] for rep in reps], dtype=float)
    sd = np.array([[r["sym_diff"] for r in rep["records"]] for rep in reps], dtype=float)
    n = len(reps)
    se = counts.std(axis=0, ddof=1) / np.sqrt(n) / L if n > 1 else np.zeros(counts.shape[1])
    out = {"intensity": (counts.mean(axis=0) / L).tolist(), "intensity_se": se.tolist(),
           "median_count": np.median(counts, axis=0).tolist(),
           "mean_sym_diff": sd.mean(axis=0).tolist(),
           "stabilized": int(sum(r["stabilized"] for r in reps)),
           "escaped_mass_bound": reps[0]["escaped_mass_bound"],
           "boundary": p["boundary"]}
    buf = io.StringIO()
    for rep in reps:
        for r in rep["records"]:
            buf.write(_json(r) + "\n")
    return out, {"convergence.jsonl": buf.getvalue()}


# palm_backward -------------------------------------------------------------

def palm_edges(p):
    w = p["half_width"]
    return np.arange(-w, w + 1, dtype=float)


def palm_replicate(p, stream):
    F, edges = p["displacement"], palm_edges(p)
    if p["construction"] == "backward":
        cfg = genealogy.backward_palm_simulate(
            F, p["spine_depth"], p["family_budget"], (edges[0], edges[-1]), stream,
            max_generations=p["max_generations"])
        counts = genealogy.palm_cell_counts(cfg, edges)
        cond = genealogy.palm_cell_conditional(cfg, F, edges)
        censored = cfg.meta["censored_families"]
    else:
        tree = genealogy.grow_kesten(p["family_budget"] * (p["spine_depth"] + 1), stream,
                                     spine_depth=p["spine_depth"],
                                     max_family_depth=p["max_generations"])
        genealogy.label_backward(tree, F, stream)
        counts = np.histogram(tree.position, edges)[0].astype(float)
        cond = genealogy.tree_cell_conditional(tree, F, edges)
        censored = int(tree.budget_used >= p["family_budget"] * (p["spine_depth"] + 1))
    return {"counts": counts.tolist(), "conditional": cond.tolist(), "censored": censored}


def palm_summary(p, reps):
    edges = palm_edges(p)
    c = np.array([r["counts"] for r in reps])
    q = np.array([r["conditional"] for r in reps])
    n = len(reps)
    sd = lambda a: a.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(a.shape[1])
    out = {"edges": edges.tolist(), "counts_mean": c.mean(axis=0).tolist(),
           "counts_se": sd(c).tolist(), "conditional_mean": q.mean(axis=0).tolist(),
           "conditional_se": sd(q).tolist(),
           "censored": int(sum(r["censored"] for r in reps))}
    buf = io.StringIO()
    buf.write("lo,hi,count_mean,count_se,conditional_mean,conditional_se\n")
    for i in range(len(edges) - 1):
        buf.write(f"{edges[i]:g},{edges[i + 1]:g},{out['counts_mean'][i]:.17g},"
                  f"{out['counts_se'][i]:.17g},{out['conditional_mean'][i]:.17g},"
                  f"{out['conditional_se'][i]:.17g}\n")
    return out, {"cells.csv": buf.getvalue()}


# kesten --------------------------------------------------------------------

def kesten_replicate(p, stream):
    tree = genealogy.grow_kesten(
        p["node_budget"], stream,
        spine_depth=None if p["spine_depth"] < 0 else p["spine_depth"],
        max_family_depth=None if p["max_family_depth"] < 0 else p["max_family_depth"])
    drawn = tree.offspring >= 0
    spec = tree.offspring[drawn & tree.special]
    norm = tree.offspring[drawn & ~tree.special]
    return {"special_hist": np.bincount(spec).tolist(), "normal_hist": np.bincount(norm).tolist(),
            "nodes": len(tree), "spine_length": int(len(tree.spine)),
            "max_depth": int(tree.depth.max()), "truncated": tree.truncated}


def _merge_hist(hists):
    width = max((len(h) for h in hists), default=0)
    out = np.zeros(width, dtype=np.int64)
    for h in hists:
        out[:len(h)] += np.asarray(h, dtype=np.int64)
    return out


def poisson_chi2(hist, shift=0, min_expected=5.0):
    """Chi-square p-value of ``hist`` (counts of ``k``) against ``shift + Pois(1)``.

    Cells are pooled from the right until every expected count is at least
    ``min_expected``; the last cell collects the whole upper tail.
    """
    hist = np.asarray(hist, dtype=float)
    n = hist.sum()
    if n == 0:
        return float("nan")
    k_hi = len(hist) + 20
    probs = np.zeros(k_hi)
    ks = np.arange(k_hi)
    probs[shift:] = stats.poisson.pmf(ks[shift:] - shift, 1.0)
    obs = np.zeros(k_hi)
    obs[:len(hist)] = hist
    if shift:
        if obs[:shift].sum() > 0:
            return 0.0
        probs, obs = probs[shift:], obs[shift:]
    exp = probs * n
    # pool the tail into the last cell with enough expectation
    last = len(exp) - 1
    while last > 0 and exp[last:].sum() + n * (1 - probs.sum()) < min_expected:
        last -= 1
    e = np.concatenate([exp[:last], [n - exp[:last].sum()]])
    o = np.concatenate([obs[:last], [obs[last:].sum()]])
    chi2 = float(((o - e) ** 2 / e).sum())
    return float(stats.chi2.sf(chi2, len(e) - 1))


def kesten_summary(p, reps):
    sh = _merge_hist([r["special_hist"] for r in reps])
    nh = _merge_hist([r["normal_hist"] for r in reps])
    mean = lambda h: float((np.arange(len(h)) * h).sum() / h.sum()) if h.sum() else float("nan")
    out = {"special_nodes": int(sh.sum()), "normal_nodes": int(nh.sum()),
           "special_mean": mean(sh), "normal_mean": mean(nh),
           "special_p": poisson_chi2(sh, 1), "normal_p": poisson_chi2(nh, 0),
           "nodes": int(sum(r["nodes"] for r in reps)),
           "spine_equals_depth": bool(all(r["spine_length"] == r["max_depth"] + 1
                                          or p["spine_depth"] >= 0 for r in reps)),
           "truncated": int(sum(r["truncated"] for r in reps))}
    return out, {}


# walk ----------------------------------------------------------------------

def walk_replicate(p, stream):
    spec = walks.WalkSpec(SymmetrizedSpec(p["displacement"]), p["n_steps"], p["h"], p["walks"])
    cps, counts = walks.occupation_counts(spec, stream)
    return {"checkpoints": cps.tolist(), "sum": counts.sum(axis=0).tolist(),
            "sumsq": (counts.astype(float) ** 2).sum(axis=0).tolist(), "walks": p["walks"]}


def walk_summary(p, reps):
    n = sum(r["walks"] for r in reps)
    s = np.sum([r["sum"] for r in reps], axis=0)
    s2 = np.sum([r["sumsq"] for r in reps], axis=0)
    mean = s / n
    var = (s2 - n * mean ** 2) / max(n - 1, 1)
    curve = walks.OccupationCurve(np.array(reps[0]["checkpoints"]), mean,
                                  np.sqrt(np.maximum(var, 0) / n), n)
    out = {"checkpoints": curve.checkpoints.tolist(), "mean_visits": mean.tolist(),
           "stderr": curve.stderr.tolist(), "walks": n,
           "tail_slope": walks.tail_slope(curve),
           "label": walks.classify_transience(curve, p["s_lo"], p["s_hi"])}
    return out, {"curve.csv": curve.to_csv()}


# inar ----------------------------------------------------------------------

def inar_spec(p):
    if p["weights"]:
        return inar.InarSpec(np.array(p["weights"]), p["target_lambda"])
    return inar.InarSpec.power_law(p["k_max"], p["exponent"], p["target_lambda"])


def inar_replicate(p, stream):
    spec = inar_spec(p)
    path = inar.simulate_inar(spec, p["N"], p["burnin"], stream)
    u = inar.innovations(path, spec)
    lag = {str(j): [float((u[:-j] * u[j:]).sum()), float(((u[:-j] * u[j:]) ** 2).sum())]
           for j in range(1, 6)}
    x = path.observed
    return {"mean_X": float(x.mean()), "var_X": float(x.var()), "sum_u": float(u.sum()),
            "sum_u2": float((u * u).sum()), "lags": lag, "events": path.events,
            "extinct": bool(x[-1] == 0 and x[-min(len(x), spec.k_max):].sum() == 0)}


def inar_summary(p, reps, seed=0):
    spec = inar_spec(p)
    su = sum(r["sum_u"] for r in reps)
    su2 = sum(r["sum_u2"] for r in reps)
    z = {j: (sum(r["lags"][j][0] for r in reps) /
             math.sqrt(max(sum(r["lags"][j][1] for r in reps), 1e-300)))
         for j in reps[0]["lags"]}
    out = {"mean_X": mean_se([r["mean_X"] for r in reps]),
           "z_mean_u": su / math.sqrt(su2) if su2 > 0 else 0.0,
           "z_lag": z, "innovation_variance": su2 / (len(reps) * p["N"]),
           "extinct_fraction": float(np.mean([r["extinct"] for r in reps])),
           "tail_mass": spec.tail_mass}
    if p["thinning_replications"]:
        out["thinning"] = inar.thinning_counts_check(
            spec if spec.k_max >= 2 else inar.InarSpec(np.array([0.5, 0.5])),
            p["thinning_replications"], split_stream(seed, 0, "inar-thinning"))
    return out, {}


# grid_oracle ---------------------------------------------------------------

def grid_oracle(p):
    """Deterministic grid computations; returns ``(summary, artifacts)``."""
    t, h, x_max = p["target"], p["h"], p["x_max"]
    F = p["displacement"]
    if t == "renewal":
        G = renewal_calc.GridMeasure.from_spec(F, h, x_max)
        U = renewal_calc.renewal_function(G, x_max)
        xs = np.unique(np.concatenate([[0, 1, 10], np.geomspace(1, x_max, 9)]))
        out = {"U": {f"{x:g}": U.cumulative(x) for x in xs},
               "residual_max": float(np.abs(renewal_calc.renewal_residual(U, G)).max()),
               "truncated_mass": G.truncated_mass}
        return out, {"renewal.csv": U.to_csv()}
    if t == "two_index":
        def build(step):
            F1 = renewal_calc.GridMeasure.from_spec(TailSpec(p["alpha1"], p["ell1"]).to_pareto(), step, x_max)
            F2 = renewal_calc.GridMeasure.from_spec(TailSpec(p["alpha2"], p["ell2"]).to_pareto(), step, x_max)
            return renewal_calc.two_index_mean(F1, F2, x_max).cumulative(x_max) / x_max
        v, v2 = build(h), build(h / 2)
        return {"ratio": v, "ratio_half_step": v2, "relative_change": abs(v2 - v) / abs(v)}, {}
    if t == "palm":
        G = renewal_calc.GridMeasure.from_spec(F, h, x_max)
        res = renewal_calc.palm_mean_measure(G, x_max, p["half_width"])
        ds = renewal_calc.palm_double_sum(G, x_max, p["g_max"], p["half_width"])
        w = p["half_width"]
        _, cells = res.measure.unit_cells(-w, w)
        _, dcells = ds.unit_cells(-w, w)
        out = {"edges": list(range(-w, w + 1)), "U0_cells": cells.tolist(),
               "double_sum_cells": dcells.tolist(), "atom0": res.measure.atom0,
               "walk_terms": res.utilde_terms}
        return out, {"palm.csv": res.measure.to_csv()}
    if t == "scan":
        entries = renewal_calc.palm_local_finiteness_scan(p["alphas"], h=max(h, 0.1))
        return {"scan": [asdict(e) for e in entries]}, {}
    if t == "laplace":
        G = renewal_calc.GridMeasure.from_spec(F, h, x_max)
        out = {f"{s:g}": (1 - renewal_calc.laplace(G, s)) for s in p["s"]}
        return {"one_minus_laplace": out}, {}
    raise ValueError(t)


def _json(obj):
    return json.dumps(obj, sort_keys=True)


REPLICATE = {
    "cluster_iterate": cluster_replicate,
    "renewal_hawkes": renewal_replicate,
    "two_index": two_index_replicate,
    "embedding": embedding_replicate,
    "palm_backward": palm_replicate,
    "kesten": kesten_replicate,
    "walk": walk_replicate,
    "inar": inar_replicate,
}

SUMMARY = {
    "cluster_iterate": cluster_summary,
    "renewal_hawkes": renewal_summary,
    "two_index": two_index_summary,
    "embedding": embedding_summary,
    "palm_backward": palm_summary,
    "kesten": kesten_summary,
    "walk": walk_summary,
    "inar": inar_summary,
}

DESCRIPTIONS = {
    "cluster_iterate": "iterated Poisson clustering N^(0) + ... + N^(g_max); intensity vs eta/(1-m)",
    "renewal_hawkes": "Hawkes process with truncated-mean renewal immigration; intensity and immigrant rate",
    "two_index": "renewal epochs with critical families on [0, horizon]; C(x)/x",
    "embedding": "Poisson embedding iteration with a shared driving field; convergence report",
    "palm_backward": "backward Palm construction; mean measure per unit cell",
    "kesten": "Kesten tree growth; offspring laws of special and normal nodes",
    "walk": "occupation curve of the symmetrized walk; transience label",
    "inar": "critical INAR(inf) paths; innovation diagnostics and Poisson thinning check",
    "grid_oracle": "deterministic grid calculus (renewal, two_index, palm, scan, laplace)",
}
