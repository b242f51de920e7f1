"""Desk-scale strong/weak scaling study of the parallel-in-time solver.

Shared-memory workers stand in for distributed ranks (the per-sweep exchange
pattern, two neighbor blocks, is the same), so the deliverable is the trend,
not absolute times.  Timing covers the solve only; assembly is excluded.
"""

from __future__ import annotations

import dataclasses
import os
import statistics
import time
import warnings

import numpy as np

from .dg import BasisSpec
from .multigrid import CycleConfig, TimeHierarchy, random_initial_guess, solve


def _check_worker_counts(workers) -> list:
    ws = list(workers)
    if not ws or any(w < 1 or (w & (w - 1)) != 0 for w in ws):
        raise ValueError(f"worker counts must be powers of two, got {workers}")
    if any(b < a for a, b in zip(ws, ws[1:])):
        raise ValueError(f"worker counts must be nondecreasing, got {workers}")
    return ws


@dataclasses.dataclass
class ScalingPlan:
    """One scaling experiment: fixed problem (strong) or fixed work per worker
    (weak), repeated ``repetitions`` times per point with the median reported."""

    mode: str                      # "strong" | "weak"
    workers: list
    steps_per_worker: int = 1 << 15
    total_steps: int = 1 << 17
    p_t_list: tuple = (0,)
    tau: float = 1e-6
    eps: float = 1e-8
    repetitions: int = 3
    seed: int = 42
    nu1: int = 2
    nu2: int = 2

    def __post_init__(self):
        if self.mode not in ("strong", "weak"):
            raise ValueError(f"mode must be 'strong' or 'weak', got {self.mode!r}")
        self.workers = _check_worker_counts(self.workers)
        if self.repetitions < 3:
            raise ValueError(f"need >= 3 repetitions for a median, got {self.repetitions}")
        if self.mode == "strong" and self.total_steps % max(self.workers) != 0:
            raise ValueError(f"total steps {self.total_steps} not divisible by "
                             f"{max(self.workers)} workers")


@dataclasses.dataclass
class ScalingRow:
    """One measured point; ``scaled`` is speedup vs one worker in strong mode
    and the wall-time growth ratio vs one worker in weak mode."""

    mode: str
    workers: int
    steps: int
    p_t: int
    median_time: float
    scaled: float
    iterations: int
    samples: list

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _run_point(basis: BasisSpec, n_steps: int, plan: ScalingPlan, workers: int):
    hier = TimeHierarchy.build(basis, plan.tau, n_steps)
    config = CycleConfig(nu1=plan.nu1, nu2=plan.nu2, eps=plan.eps,
                         seed=plan.seed, workers=workers)
    f = np.zeros((n_steps, basis.n_t))
    u_init = random_initial_guess(hier, plan.seed)
    samples = []
    iterations = 0
    for _ in range(plan.repetitions):
        t0 = time.perf_counter()
        _, stats = solve(hier, f, u_init, config)
        samples.append(time.perf_counter() - t0)
        iterations = stats.iterations
    return statistics.median(samples), iterations, samples


def _warn_if_oversubscribed(workers: int) -> None:
    cpus = os.cpu_count() or 1
    if workers > cpus:
        warnings.warn(f"{workers} workers on {cpus} hardware threads: "
                      "timings will not scale", stacklevel=3)


def run_strong_scaling(plan: ScalingPlan) -> list:
    """Fixed problem size, growing worker count; rows carry speedup vs 1 worker."""
    if plan.mode != "strong":
        raise ValueError("plan mode must be 'strong'")
    rows = []
    for p_t in plan.p_t_list:
        basis = BasisSpec(p_t)
        base_time = None
        for w in plan.workers:
            _warn_if_oversubscribed(w)
            med, iters, samples = _run_point(basis, plan.total_steps, plan, w)
            if base_time is None:
                base_time = med
            rows.append(ScalingRow(mode="strong", workers=w, steps=plan.total_steps,
                                   p_t=p_t, median_time=med, scaled=base_time / med,
                                   iterations=iters, samples=samples))
    return rows


def run_weak_scaling(plan: ScalingPlan) -> list:
    """Fixed steps per worker, growing worker count; rows carry the wall-time
    ratio vs the single-worker baseline."""
    if plan.mode != "weak":
        raise ValueError("plan mode must be 'weak'")
    rows = []
    for p_t in plan.p_t_list:
        basis = BasisSpec(p_t)
        base_time = None
        for w in plan.workers:
            _warn_if_oversubscribed(w)
            n_steps = w * plan.steps_per_worker
            med, iters, samples = _run_point(basis, n_steps, plan, w)
            if base_time is None:
                base_time = med
            rows.append(ScalingRow(mode="weak", workers=w, steps=n_steps,
                                   p_t=p_t, median_time=med, scaled=med / base_time,
                                   iterations=iters, samples=samples))
    return rows
