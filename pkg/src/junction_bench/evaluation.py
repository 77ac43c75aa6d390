"""Benchmark harness: deterministic grid test, stochastic test and reports."""
from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .env import EpisodeResult, IntersectionEnv, Outcome
from .scenario import (FUNCTIONAL_SCENARIOS, TASK_GROUPS, LogicalScenario, StochasticConfig,
                       enumerate_grid)

CSV_COLUMNS = ["scenario_id", "episodes", "successes", "collisions", "timeouts",
               "success_rate_pct", "avg_time_s"]


def success_rate(successes: int, total: int) -> float:
    if total < 1:
        raise ValueError("success rate needs at least one episode")
    return successes / total * 100.0


@dataclass(frozen=True)
class CellRecord:
    """Outcome of one evaluated episode."""

    group: str
    outcome: str
    duration: float
    seed: int
    V: float | None = None
    d: float | None = None
    total_reward: float = 0.0


@dataclass(frozen=True)
class Metrics:
    successes: int = 0
    collisions: int = 0
    timeouts: int = 0
    success_time: float = 0.0

    @property
    def episodes(self) -> int:
        return self.successes + self.collisions + self.timeouts

    @property
    def success_rate(self) -> float:
        return success_rate(self.successes, self.episodes)

    @property
    def avg_time(self) -> float | None:
        """Mean passing time over successful episodes, None when there are none."""
        return self.success_time / self.successes if self.successes else None

    def merge(self, other: "Metrics") -> "Metrics":
        return Metrics(self.successes + other.successes, self.collisions + other.collisions,
                       self.timeouts + other.timeouts, self.success_time + other.success_time)

    @classmethod
    def from_records(cls, records) -> "Metrics":
        s = c = t = 0
        times = []
        for r in records:
            if r.outcome == Outcome.SUCCESS.value:
                s += 1
                times.append(r.duration)
            elif r.outcome == Outcome.COLLISION.value:
                c += 1
            elif r.outcome == Outcome.TIMEOUT.value:
                t += 1
            else:
                raise ValueError(f"unfinished episode in records: {r}")
        return cls(s, c, t, math.fsum(times))


@dataclass
class TestReport:
    agent: str
    kind: str
    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)

    def groups(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.group not in seen:
                seen.append(r.group)
        return seen

    def metrics(self) -> dict:
        return {g: Metrics.from_records([r for r in self.records if r.group == g])
                for g in self.groups()}

    def by_task(self) -> dict:
        """Merge functional-scenario metrics into ego-task columns (a,b | c | d,e)."""
        per = self.metrics()
        out = {}
        for task, ids in TASK_GROUPS.items():
            present = [per[i] for i in ids if i in per]
            if present:
                total = Metrics()
                for m in present:
                    total = total.merge(m)
                out[task.value] = total
        return out


def run_episode(env: IntersectionEnv, scenario, agent, seed: int) -> EpisodeResult:
    obs = env.reset(scenario, seed)
    while True:
        out = env.step(agent.act(obs, env))
        obs = out.observation
        if out.done:
            return env.result()


def _run_jobs(agent, env_factory, jobs):
    """Run ``(group, scenario, seed, V, d)`` jobs in order on one environment."""
    env = env_factory()
    out = []
    for group, scenario, seed, V, d in jobs:
        res = run_episode(env, scenario, agent, seed)
        out.append(CellRecord(group, res.outcome.value, res.duration, seed, V, d,
                              res.total_reward))
    return out


def _execute(agent, env_factory, jobs, workers: int):
    # contiguous chunks keep the reduction order equal to the job order
    if workers <= 1 or len(jobs) < 2:
        return _run_jobs(agent, env_factory, jobs)
    size = -(-len(jobs) // workers)
    chunks = [jobs[i:i + size] for i in range(0, len(jobs), size)]
    with ProcessPoolExecutor(workers) as pool:
        parts = pool.map(_run_jobs, [agent] * len(chunks), [env_factory] * len(chunks), chunks)
        return [rec for part in parts for rec in part]


def _env_config(env) -> dict:
    return {"sim": asdict(env.sim), "reward": asdict(env.reward_cfg), "warmup": env.warmup,
            "social_aeb": asdict(env.social_aeb),
            "map": {"lane_width": env.map.lane_width,
                    "approach_length": env.map.approach_length,
                    "junction_box": list(env.map.junction_box)}}


def run_deterministic(agent, functional_ids=tuple(FUNCTIONAL_SCENARIOS), seeds=(0,),
                      env_factory=IntersectionEnv, logical_overrides=None,
                      workers: int = 1) -> TestReport:
    """One episode per grid cell per seed, for each requested functional scenario.

    ``logical_overrides`` replaces the logical ranges or step. With
    ``workers > 1`` episodes run in a process pool; records keep grid order.
    """
    overrides = dict(logical_overrides or {})
    jobs = []
    for sid in functional_ids:
        if sid not in FUNCTIONAL_SCENARIOS:
            raise ValueError(f"unknown functional scenario {sid!r}")
        logical = LogicalScenario(FUNCTIONAL_SCENARIOS[sid], **overrides)
        for cell in enumerate_grid(logical):
            for seed in seeds:
                jobs.append((sid, cell, seed, cell.V, cell.d))
    report = TestReport(getattr(agent, "label", type(agent).__name__), "deterministic",
                        seeds=list(seeds))
    report.records = _execute(agent, env_factory, jobs, workers)
    report.config = {"functional_ids": list(functional_ids), "logical": overrides,
                     **_env_config(env_factory())}
    return report


def run_stochastic(agent, config: StochasticConfig, n: int = 1000, seed: int = 0,
                   env_factory=IntersectionEnv, workers: int = 1) -> TestReport:
    """``n`` episodes of the stochastic test for one ego task."""
    if n < 1:
        raise ValueError("stochastic test needs n >= 1 episodes")
    task = config.ego_task.turn.value
    jobs = [(task, config, stochastic_seed(seed, k), None, None) for k in range(n)]
    report = TestReport(getattr(agent, "label", type(agent).__name__), "stochastic",
                        seeds=[seed])
    report.records = _execute(agent, env_factory, jobs, workers)
    report.config = {"stochastic": _jsonable(asdict(config)), "episodes": n,
                     **_env_config(env_factory())}
    return report


def stochastic_seed(seed: int, k: int) -> int:
    """Episode seed for the ``k``-th stochastic episode of a run seeded with ``seed``."""
    return seed * 1_000_003 + k


def merge_reports(reports) -> TestReport:
    reports = list(reports)
    out = TestReport(reports[0].agent, reports[0].kind)
    for r in reports:
        out.records.extend(r.records)
        out.seeds.extend(s for s in r.seeds if s not in out.seeds)
        out.config.setdefault("parts", []).append(r.config)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


def _fmt(x):
    return "" if x is None else f"{x:.6g}"


def _write_metrics_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for gid, m in rows:
            w.writerow([gid, m.episodes, m.successes, m.collisions, m.timeouts,
                        _fmt(m.success_rate), _fmt(m.avg_time)])


def emit_report(report: TestReport, out_dir, stem: str | None = None) -> list[Path]:
    """Write ``<stem>.csv`` (one row per group) and ``<stem>_summary.json``.

    Deterministic reports also get ``<stem>_by_task.csv`` with the scenarios
    merged per ego task. Returns the written paths; I/O errors name the path.
    """
    out = Path(out_dir)
    stem = stem or f"{report.kind}_{report.agent.replace(':', '_').replace('/', '_')}"
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    paths = [out / f"{stem}.csv", out / f"{stem}_summary.json"]
    try:
        _write_metrics_csv(paths[0], report.metrics().items())
        if report.kind == "deterministic":
            paths.append(out / f"{stem}_by_task.csv")
            _write_metrics_csv(paths[-1], report.by_task().items())
        config = _jsonable(report.config)
        config_hash = hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()
        summary = {"agent": report.agent, "kind": report.kind, "config": config,
                   "config_hash": config_hash, "seeds": report.seeds,
                   "cells": [asdict(r) for r in report.records]}
        with open(paths[1], "w") as fh:
            json.dump(summary, fh, indent=1)
    except OSError as exc:
        raise OSError(f"failed writing report under {out}: {exc}") from exc
    return paths


def load_report(json_path) -> TestReport:
    data = json.loads(Path(json_path).read_text())
    rep = TestReport(data["agent"], data["kind"], config=data["config"], seeds=data["seeds"])
    rep.records = [CellRecord(**c) for c in data["cells"]]
    return rep
