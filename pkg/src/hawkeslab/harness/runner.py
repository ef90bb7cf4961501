"""Seeded, parallel, deterministic execution of experiment configs."""
from __future__ import annotations

import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from ..errors import LabError
from ..rng import split_stream
from .config import ExperimentConfig
from .experiments import REPLICATE, SUMMARY, grid_oracle

PACKAGE_VERSION = "0.1.0"


@dataclass
class RunResult:
    metadata: dict
    summary: dict
    artifacts: dict = field(default_factory=dict)   # file name -> path


def worker_count(requested: Optional[int] = None) -> int:
    """``requested`` if given, else ``LAB_THREADS``, else the CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def jsonable(obj):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def run_replicate(kind: str, params: dict, seed: int, index: int) -> dict:
    """One replicate on the stream keyed by ``(seed, index, kind)``."""
    stream = split_stream(seed, index, kind)
    fn = REPLICATE[kind]
    if kind == "embedding":
        return fn(params, stream, seed, index)
    return fn(params, stream)


def _star(args):
    return run_replicate(*args)


def execute(cfg: ExperimentConfig, workers: Optional[int] = None):
    """Return ``(replicates, summary, artifacts)`` without touching the disk."""
    if cfg.kind == "grid_oracle":
        summary, artifacts = grid_oracle(cfg.params)
        return [], summary, artifacts
    n = cfg.replications
    if n == 0:
        return [], {}, {}
    jobs = [(cfg.kind, cfg.params, cfg.seed, i) for i in range(n)]
    w = min(worker_count(workers), n)
    if w > 1:
        with ProcessPoolExecutor(max_workers=w) as pool:
            reps = list(pool.map(_star, jobs))   # map keeps replicate order
    else:
        reps = [_star(j) for j in jobs]
    reps = [jsonable(r) for r in reps]
    summarize = SUMMARY[cfg.kind]
    if cfg.kind == "inar":
        summary, artifacts = summarize(cfg.params, reps, cfg.seed)
    else:
        summary, artifacts = summarize(cfg.params, reps)
    return reps, summary, artifacts


def metadata(cfg: ExperimentConfig) -> dict:
    return {"config": cfg.echo(), "config_hash": cfg.hash(),
            "versions": {"package": PACKAGE_VERSION, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__}}


def run(cfg: ExperimentConfig, workers: Optional[int] = None, out: Optional[str] = None) -> RunResult:
    """Run ``cfg`` and write ``summary.json``, ``replicates.jsonl`` and artifacts to ``out``.

    Module errors are re-raised with the experiment kind as context.
    """
    try:
        reps, summary, artifacts = execute(cfg, workers)
    except LabError as exc:
        exc.args = (f"{cfg.kind}: {exc}",)
        raise
    meta = metadata(cfg)
    summary = jsonable(summary)
    out_dir = Path(out or cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    tag = f"# config_hash={meta['config_hash']}\n"
    doc = {"metadata": meta, "summary": summary}
    p = out_dir / "summary.json"
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    paths["summary.json"] = str(p)
    p = out_dir / "replicates.jsonl"
    with p.open("w") as fh:
        fh.write(json.dumps({"config_hash": meta["config_hash"]}) + "\n")
        for i, r in enumerate(reps):
            fh.write(json.dumps({"replicate": i, **r}, sort_keys=True) + "\n")
    paths["replicates.jsonl"] = str(p)
    for name, text in artifacts.items():
        p = out_dir / name
        if name.endswith(".jsonl"):
            p.write_text(json.dumps({"config_hash": meta["config_hash"]}) + "\n" + text)
        else:
            p.write_text(tag + text)
        paths[name] = str(p)
    return RunResult(meta, summary, paths)
