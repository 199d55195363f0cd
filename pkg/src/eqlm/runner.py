"""Seeded multi-run training campaigns and their on-disk artifacts.

A campaign directory holds one ``run_NNN.csv`` (``episode,return``) per run,
``config.json`` (the fully resolved configuration, loadable with
``--config``), ``summary.json`` and a learning-curve figure.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import metrics
from .agents import AGENT_KINDS, AgentConfig, ConfigError, make_agent, train
from .cartpole import CartPole

log = logging.getLogger(__name__)

BUNDLED = ("qnet", "eqlm", "heuristic-only")
SIGNIFICANCE = 0.05
FINAL_WINDOW = 100


class InputError(ValueError):
    """A campaign artifact is missing or unusable."""


@dataclass
class ExperimentConfig:
    agent: str
    agent_config: AgentConfig
    n_runs: int = 1
    base_seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.agent not in AGENT_KINDS:
            raise ConfigError("agent", f"must be one of {sorted(AGENT_KINDS)}, got {self.agent!r}")
        if not isinstance(self.n_runs, int) or self.n_runs < 1:
            raise ConfigError("n_runs", "must be an integer >= 1")
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise ConfigError("base_seed", "must be a non-negative integer")

    def to_flat(self) -> dict:
        d = {"agent": self.agent, **self.agent_config.to_dict(),
             "n_runs": self.n_runs, "base_seed": self.base_seed}
        if self.out is not None:
            d["out"] = self.out
        return d

    @classmethod
    def from_flat(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "agent" not in d:
            raise ConfigError("agent", "missing")
        agent_keys = {f.name for f in fields(AgentConfig)}
        top = {k: d.pop(k) for k in ("agent", "n_runs", "base_seed", "out") if k in d}
        unknown = set(d) - agent_keys
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown setting")
        for name, value in d.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(name, f"expected a number, got {value!r}")
        int_fields = {f.name for f in fields(AgentConfig) if f.type in ("int", int)}
        for name in int_fields & set(d):
            if d[name] != int(d[name]):
                raise ConfigError(name, "expected an integer")
            d[name] = int(d[name])
        return cls(agent_config=AgentConfig(**d), **top)

    def replace(self, **changes) -> "ExperimentConfig":
        flat = self.to_flat()
        flat.update(changes)
        return ExperimentConfig.from_flat(flat)


def load_config(path) -> ExperimentConfig:
    """Read a flat JSON config, or a bundled one by name (``eqlm``, ``qnet``, ...)."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        text = resources.files("eqlm").joinpath("configs", f"{path}.json").read_text()
    else:
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError("config", "top level must be an object")
    return ExperimentConfig.from_flat(d)


def run_seed(config: ExperimentConfig, run_index: int) -> int:
    return config.base_seed + run_index


def run_generators(seed: int) -> tuple[np.random.Generator, ...]:
    """Independent (environment, network-init, exploration) generators for one run.

    The environment and init streams depend only on the seed, so different
    agents see the same initial states for the same run index.
    """
    env_ss, init_ss, explore_ss = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(env_ss), np.random.default_rng(init_ss),
            np.random.default_rng(explore_ss))


def run_one(config: ExperimentConfig, run_index: int) -> dict:
    seed = run_seed(config, run_index)
    env_rng, init_rng, rng = run_generators(seed)
    agent = make_agent(config.agent, config.agent_config, init_rng)
    t0 = time.perf_counter()
    curve = train(agent, CartPole(), rng, env_rng)
    return {"run": run_index, "seed": seed, "wall_time": time.perf_counter() - t0,
            "curve": curve, "skipped_updates": agent.skipped_updates}


def _run_one_packed(args):
    return run_one(*args)


@dataclass
class RunArtifact:
    config: ExperimentConfig
    runs: list[dict]
    summary: dict = field(default_factory=dict)

    @property
    def curves(self) -> list[np.ndarray]:
        return [r["curve"] for r in self.runs]


def final_window(n_ep: int) -> int:
    return min(FINAL_WINDOW, n_ep)


def summarize_runs(curves, window: int) -> dict:
    out = {}
    values = {"final_mean": [metrics.final_mean(c, window) for c in curves],
              "auc": [metrics.auc(c) for c in curves]}
    for name, v in values.items():
        if len(v) >= 2:
            out[name] = metrics.summarize(v)
        else:
            out[name] = {"mean": float(v[0]), "ci_low": None, "ci_high": None,
                         "std": 0.0, "std_ci_low": None, "std_ci_high": None, "n_runs": 1}
    out["final_window"] = window
    return out


def run_campaign(config: ExperimentConfig, jobs: int = 1) -> RunArtifact:
    """Run ``config.n_runs`` seeded trainings, optionally in worker processes.

    Each run depends only on its own seed, so parallel and serial execution
    give identical curves.
    """
    tasks = [(config, i) for i in range(config.n_runs)]
    if jobs > 1 and config.n_runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_one_packed, tasks))
    else:
        runs = [run_one(*t) for t in tasks]
    window = final_window(config.agent_config.n_ep)
    summary = summarize_runs([r["curve"] for r in runs], window) if config.agent_config.n_ep else {}
    return RunArtifact(config, runs, summary)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_artifact(artifact: RunArtifact, out_dir, plot: bool = True) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for r in artifact.runs:
            with open(out / f"run_{r['run']:03d}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["episode", "return"])
                for ep, ret in enumerate(r["curve"]):
                    w.writerow([ep, _fmt(ret)])
        echo = artifact.config.to_flat()
        echo.pop("out", None)
        (out / "config.json").write_text(json.dumps(echo, indent=2) + "\n")
        summary = {
            "agent": artifact.config.agent,
            "config": echo,
            "runs": [{"run": r["run"], "seed": r["seed"], "wall_time": r["wall_time"],
                      "skipped_updates": r.get("skipped_updates", 0),
                      "file": f"run_{r['run']:03d}.csv"} for r in artifact.runs],
            **artifact.summary,
        }
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write artifact to {out}: {exc}") from exc
    if plot and artifact.runs and artifact.config.agent_config.n_ep:
        from .plotting import learning_curve_figure
        learning_curve_figure({artifact.config.agent: artifact.curves}, out / "learning_curve.png")
    return out


def load_artifact(path) -> RunArtifact:
    p = Path(path)
    summary_path = p / "summary.json"
    if not summary_path.is_file():
        raise InputError(f"{p} is not a campaign directory (no summary.json)")
    try:
        summary = json.loads(summary_path.read_text())
        config = ExperimentConfig.from_flat(summary["config"])
        runs = []
        for r in summary["runs"]:
            with open(p / r["file"], newline="") as fh:
                rows = list(csv.DictReader(fh))
            curve = np.array([float(row["return"]) for row in rows])
            runs.append({**r, "curve": curve})
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read campaign {p}: {exc}") from exc
    extra = {k: v for k, v in summary.items() if k not in ("agent", "config", "runs")}
    return RunArtifact(config, runs, extra)


def compare(a: RunArtifact, b: RunArtifact, labels=("a", "b")) -> dict:
    """Welch t-tests on final-window reward and AUC between two campaigns."""
    for label, art in zip(labels, (a, b)):
        if len(art.runs) < 2:
            raise InputError(f"campaign {label} needs at least 2 runs, has {len(art.runs)}")
    window = min(final_window(len(c)) for c in a.curves + b.curves)
    report = {"labels": list(labels), "final_window": window, "threshold": SIGNIFICANCE,
              "agents": [a.config.agent, b.config.agent], "metrics": {}}
    for name, fn in (("final_mean", lambda c: metrics.final_mean(c, window)),
                     ("auc", metrics.auc)):
        va = [fn(c) for c in a.curves]
        vb = [fn(c) for c in b.curves]
        t, p = metrics.t_test(va, vb)
        report["metrics"][name] = {
            labels[0]: metrics.summarize(va),
            labels[1]: metrics.summarize(vb),
            "t": t, "p": p,
            "verdict": "rejected" if p < SIGNIFICANCE else "not rejected",
        }
    return report


def tuning_loss(config: ExperimentConfig, n_runs: int = 8, jobs: int = 1) -> float:
    art = run_campaign(config.replace(n_runs=n_runs), jobs=jobs)
    return metrics.tuning_loss(art.curves)


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
