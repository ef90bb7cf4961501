"""Experiment configuration files.

A config is an INI file with an ``[experiment]`` section (``kind``,
``seed``, ``replications``, ``out``) and a ``[params]`` section whose keys
depend on the kind.  Displacement laws use the flat form
``family=pareto alpha=0.5 x_m=1.0``; intervals are two numbers separated by
a space.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from ..distributions import DisplacementSpec
from ..errors import ConfigInvalid

SEED_MAX = 2 ** 64 - 1


def _float(text):
    return float(text)


def _int(text):
    if isinstance(text, int):
        return text
    try:
        return int(str(text).strip())
    except ValueError:
        v = float(text)   # accepts forms like 1e5
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _interval(text):
    parts = [float(t) for t in str(text).replace(",", " ").split()]
    if len(parts) != 2 or parts[1] < parts[0]:
        raise ValueError("expected 'lo hi' with lo <= hi")
    return tuple(parts)


def _floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def _spec(text):
    return DisplacementSpec.from_kv(str(text))


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    return parse


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


@dataclass(frozen=True)
class Param:
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False
    check: Callable[[Any], bool] = lambda v: True
    rule: str = ""


def positive(v):
    return v > 0


def nonneg(v):
    return v >= 0


P = Param
SCHEMAS: dict[str, dict[str, Param]] = {
    "cluster_iterate": {
        "eta": P(_float, 0.5, check=positive, rule="> 0"),
        "m": P(_float, 0.5, check=nonneg, rule=">= 0"),
        "displacement": P(_spec, "family=pareto alpha=0.5 x_m=1.0"),
        "window": P(_interval, "0 10000"),
        "buffer": P(_float, 1e5, check=nonneg, rule=">= 0"),
        "g_max": P(_int, 60, check=nonneg, rule=">= 0"),
        "point_cap": P(_int, 50_000_000, check=positive, rule="> 0"),
        "blocks": P(_int, 20, check=lambda v: v >= 2, rule=">= 2"),
    },
    "renewal_hawkes": {
        "displacement": P(_spec, "family=pareto alpha=0.5 x_m=1.0"),
        "m": P(_float, 0.5, check=lambda v: 0 <= v < 1, rule="in [0, 1)"),
        "target_lambda": P(_float, 1.0, check=positive, rule="> 0"),
        "horizon": P(_float, 1e5, check=positive, rule="> 0"),
        "burnin": P(_float, -1.0, rule="negative means ten horizons"),
        "family_budget": P(_int, 1_000_000, check=positive, rule="> 0"),
        "blocks": P(_int, 20, check=lambda v: v >= 2, rule=">= 2"),
    },
    "two_index": {
        "alpha1": P(_float, 0.3, check=lambda v: 0 < v < 1, rule="in (0, 1)"),
        "alpha2": P(_float, 0.7, check=lambda v: 0 < v <= 1, rule="in (0, 1]"),
        "ell1": P(_float, 1.0, check=positive, rule="> 0"),
        "ell2": P(_float, 1.0, check=positive, rule="> 0"),
        "horizon": P(_float, 1e4, check=positive, rule="> 0"),
        "family_budget": P(_int, 100_000, check=positive, rule="> 0"),
    },
    "embedding": {
        "lambda": P(_float, 1.0, check=nonneg, rule=">= 0"),
        "displacement": P(_spec, "family=pareto alpha=0.4 x_m=1.0"),
        "window": P(_interval, "0 10000"),
        "buffer": P(_float, 1e5, check=nonneg, rule=">= 0"),
        "inner_window": P(_interval, "0 10000"),
        "g_max": P(_int, 5, check=nonneg, rule=">= 0"),
        "stable_run": P(_int, 3, check=positive, rule="> 0"),
        "boundary": P(_choice("mean_field", "none"), "mean_field"),
        "height_cap": P(_float, 1e6, check=positive, rule="> 0"),
    },
    "palm_backward": {
        "displacement": P(_spec, "family=pareto alpha=0.3 x_m=1.0"),
        "spine_depth": P(_int, 50, check=nonneg, rule=">= 0"),
        "max_generations": P(_int, 50, check=nonneg, rule=">= 0"),
        "family_budget": P(_int, 100_000, check=positive, rule="> 0"),
        "half_width": P(_int, 10, check=positive, rule="> 0"),
        "construction": P(_choice("backward", "kesten"), "backward"),
    },
    "kesten": {
        "node_budget": P(_int, 100_000, check=positive, rule="> 0"),
        "spine_depth": P(_int, -1, rule="negative means plain breadth-first growth"),
        "max_family_depth": P(_int, -1, rule="negative means unlimited"),
    },
    "walk": {
        "displacement": P(_spec, "family=exponential rate=1.0"),
        "n_steps": P(_int, 2 ** 16, check=lambda v: v >= 2 ** 8, rule=">= 256"),
        "h": P(_float, 1.0, check=positive, rule="> 0"),
        "walks": P(_int, 100, check=positive, rule="> 0"),
        "s_lo": P(_float, 0.05),
        "s_hi": P(_float, 0.2),
    },
    "inar": {
        "weights": P(_floats, "", rule="explicit lag weights; empty means a power law"),
        "k_max": P(_int, 1000, check=positive, rule="> 0"),
        "exponent": P(_float, 1.4, check=lambda v: v > 1, rule="> 1"),
        "target_lambda": P(_float, 1.0, check=positive, rule="> 0"),
        "N": P(_int, 10_000, check=positive, rule="> 0"),
        "burnin": P(_int, 0, check=nonneg, rule=">= 0"),
        "thinning_replications": P(_int, 100_000, check=nonneg, rule=">= 0"),
    },
    "grid_oracle": {
        "target": P(_choice("renewal", "two_index", "palm", "scan", "laplace"), required=True),
        "displacement": P(_spec, "family=pareto alpha=0.3 x_m=1.0"),
        "h": P(_float, 0.01, check=positive, rule="> 0"),
        "x_max": P(_float, 1e4, check=positive, rule="> 0"),
        "alpha1": P(_float, 0.3, check=lambda v: 0 < v < 1, rule="in (0, 1)"),
        "alpha2": P(_float, 0.7, check=lambda v: 0 < v < 1, rule="in (0, 1)"),
        "ell1": P(_float, 1.0, check=positive, rule="> 0"),
        "ell2": P(_float, 1.0, check=positive, rule="> 0"),
        "alphas": P(_floats, "0.3 0.5 0.7"),
        "half_width": P(_int, 10, check=positive, rule="> 0"),
        "g_max": P(_int, 50, check=positive, rule="> 0"),
        "s": P(_floats, "0.1 0.01 0.001"),
    },
}

KINDS = tuple(SCHEMAS)


@dataclass
class ExperimentConfig:
    kind: str
    params: dict
    seed: int = 0
    replications: int = 1
    out: str = "runs/out"
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """Plain-text view of every parameter, defaults included."""
        return {"kind": self.kind, "seed": self.seed, "replications": self.replications,
                "params": {k: _text(v) for k, v in sorted(self.params.items())}}

    def hash(self) -> str:
        blob = json.dumps(self.echo(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _text(v):
    if isinstance(v, DisplacementSpec):
        return v.to_kv()
    if isinstance(v, (tuple, list)):
        return " ".join(repr(float(x)) for x in v)
    return str(v)


def build_config(kind, params=None, seed=0, replications=1, out="runs/out") -> ExperimentConfig:
    """Validate raw string (or already typed) parameters against the kind's schema."""
    if kind not in SCHEMAS:
        raise ConfigInvalid("kind", f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}")
    try:
        seed = _int(seed)
    except (TypeError, ValueError):
        raise ConfigInvalid("seed", "must be an integer") from None
    if not 0 <= seed <= SEED_MAX:
        raise ConfigInvalid("seed", "must be a 64-bit unsigned integer")
    try:
        replications = _int(replications)
    except (TypeError, ValueError):
        raise ConfigInvalid("replications", "must be an integer") from None
    if replications < 0:
        raise ConfigInvalid("replications", "must be >= 0")
    schema = SCHEMAS[kind]
    params = dict(params or {})
    unknown = sorted(set(params) - set(schema))
    if unknown:
        raise ConfigInvalid(unknown[0], f"unknown parameter for kind {kind!r}")
    typed = {}
    for name, p in schema.items():
        if name in params:
            value = params[name]
        elif p.required:
            raise ConfigInvalid(name, "is required")
        else:
            value = p.default
        try:
            v = p.parse(value) if isinstance(value, str) else value
        except (ValueError, TypeError, ConfigInvalid) as exc:
            raise ConfigInvalid(name, str(exc)) from None
        if not p.check(v):
            raise ConfigInvalid(name, f"must be {p.rule}")
        typed[name] = v
    _cross_checks(kind, typed)
    return ExperimentConfig(kind, typed, seed, replications, str(out), dict(params))


def _cross_checks(kind, p):
    if kind == "embedding":
        (a, b), (c, d) = p["window"], p["inner_window"]
        if c < a or d > b:
            raise ConfigInvalid("inner_window", "must lie inside window")
        if not p["displacement"].has_density:
            raise ConfigInvalid("displacement", "the embedding needs a law with a density")
    if kind == "walk" and p["s_lo"] >= p["s_hi"]:
        raise ConfigInvalid("s_lo", "must be below s_hi")
    if kind == "inar" and p["weights"]:
        w = p["weights"]
        if min(w) < 0 or sum(w) > 1 + 1e-12:
            raise ConfigInvalid("weights", "must be nonnegative with sum at most 1")


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigInvalid("file", str(exc)) from None
    except OSError as exc:
        raise ConfigInvalid("file", f"cannot read {path}: {exc.strerror}") from None
    if not parser.has_section("experiment"):
        raise ConfigInvalid("experiment", "missing [experiment] section")
    exp = dict(parser["experiment"])
    if "kind" not in exp:
        raise ConfigInvalid("kind", "is required")
    params = dict(parser["params"]) if parser.has_section("params") else {}
    default_out = str(Path("runs") / Path(path).stem)
    return build_config(exp.pop("kind"), params, exp.pop("seed", 0),
                        exp.pop("replications", 1), exp.pop("out", default_out))


def with_overrides(cfg: ExperimentConfig, seed=None, replications=None, out=None) -> ExperimentConfig:
    return build_config(cfg.kind, cfg.params,
                        cfg.seed if seed is None else seed,
                        cfg.replications if replications is None else replications,
                        cfg.out if out is None else out)
