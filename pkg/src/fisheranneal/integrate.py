"""Euler-Maruyama particle-ensemble integration.

Update rule per particle: X <- X + h * drift(t_n, X) + sqrt(2 D(t_n) h) * xi
with xi standard normal on the noised coordinates (all of them for the
elliptic families, velocity only for the kinetic one) and t_n = t0 + n h.

Noise is drawn from counter-based Philox streams keyed by
(seed, step_index, particle_block), with a fixed block size, so trajectories
are bit-reproducible regardless of how many worker threads step the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .dynamics import DynamicsSpec

BLOCK_SIZE = 1 << 14


class IntegrationError(RuntimeError):
    """Raised when a particle state stops being finite."""


@dataclass(frozen=True)
class StepPlan:
    h: float
    n_steps: int
    t0: float
    record_every: int = 1

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step size h must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def time_at(self, n: int) -> float:
        return self.t0 + n * self.h

    def record_steps(self) -> list[int]:
        steps = list(range(0, self.n_steps + 1, self.record_every))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return steps


@dataclass(frozen=True)
class Ensemble:
    positions: np.ndarray          # (M, state_dim)
    step_index: int
    time: float
    seed: int

    @property
    def size(self):
        return self.positions.shape[0]

    def check_finite(self, context: str = "") -> None:
        bad = ~np.isfinite(self.positions)
        if bad.any():
            particle = int(np.nonzero(bad.any(axis=1))[0][0])
            raise IntegrationError(
                f"non-finite state at step {self.step_index} "
                f"(t={self.time:.6g}), particle {particle}"
                + (f": {context}" if context else "")
            )


def _block_starts(m: int) -> range:
    return range(0, m, BLOCK_SIZE)


def normal_draws(seed: int, stream: int, m: int, ncols: int) -> np.ndarray:
    """Standard normals, shape (m, ncols), from per-block Philox streams."""
    out = np.empty((m, ncols))
    for lo in _block_starts(m):
        hi = min(lo + BLOCK_SIZE, m)
        out[lo:hi] = _block_draws(seed, stream, lo // BLOCK_SIZE, hi - lo, ncols)
    return out


def _block_draws(seed, stream, block, rows, ncols):
    gen = Generator(Philox(SeedSequence((seed, stream, block))))
    return gen.standard_normal((rows, ncols))


def em_step(ensemble: Ensemble, spec: DynamicsSpec, h: float,
            noise: bool = True, workers: int = 1,
            executor: Optional[ThreadPoolExecutor] = None) -> Ensemble:
    """Advance the whole ensemble one Euler-Maruyama step."""
    t = ensemble.time
    d_weight = spec.diffusion_weight(t)
    if d_weight <= 0:
        raise ValueError(f"diffusion schedule non-positive at t={t:.6g}: {d_weight}")
    scale = np.sqrt(2.0 * d_weight * h)
    idx = spec.noise_indices
    x = ensemble.positions
    out = np.empty_like(x)
    stream = ensemble.step_index + 1   # stream 0 is reserved for init draws

    def step_block(lo):
        hi = min(lo + BLOCK_SIZE, x.shape[0])
        xb = x[lo:hi]
        new = xb + h * spec.drift(t, xb)
        if noise:
            xi = _block_draws(ensemble.seed, stream, lo // BLOCK_SIZE,
                              hi - lo, len(idx))
            new[:, idx] += scale * xi
        out[lo:hi] = new

    starts = list(_block_starts(x.shape[0]))
    if workers > 1 and len(starts) > 1:
        if executor is not None:
            list(executor.map(step_block, starts))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(step_block, starts))
    else:
        for lo in starts:
            step_block(lo)

    advanced = Ensemble(out, ensemble.step_index + 1,
                        ensemble.time + h, ensemble.seed)
    advanced.check_finite()
    return advanced


@dataclass
class TrajectoryResult:
    times: list[float] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    final: Optional[Ensemble] = None

    def series(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.records])


def run_trajectory(spec: DynamicsSpec, plan: StepPlan, M: int,
                   observers: Sequence[Callable[[Ensemble], dict]] = (),
                   seed: int = 0,
                   init: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                   workers: int = 1, noise: bool = True) -> TrajectoryResult:
    """Integrate an M-particle ensemble, invoking observers at the record cadence.

    ``init`` maps an (M, state_dim) array of standard normals to initial
    positions; the default uses the standard normals directly. Output is a
    deterministic function of (spec, plan, M, seed) for any worker count.
    """
    if M < 1:
        raise ValueError("particle count M must be >= 1")
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")

    base = normal_draws(seed, 0, M, spec.state_dim)
    positions = base if init is None else np.asarray(init(base), dtype=float)
    if positions.shape != (M, spec.state_dim):
        raise ValueError(
            f"init must produce shape {(M, spec.state_dim)}, got {positions.shape}"
        )
    ens = Ensemble(positions, 0, plan.t0, seed)
    ens.check_finite("initial ensemble")

    record_at = set(plan.record_steps())
    result = TrajectoryResult()

    def record(e: Ensemble):
        row: dict = {}
        for obs in observers:
            row.update(obs(e))
        result.times.append(e.time)
        result.records.append(row)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        if 0 in record_at:
            record(ens)
        for n in range(plan.n_steps):
            try:
                ens = em_step(ens, spec, plan.h, noise=noise,
                              workers=workers, executor=pool)
            except IntegrationError:
                raise
            except Exception as exc:
                raise IntegrationError(f"step {n} failed: {exc}") from exc
            if ens.step_index in record_at:
                record(ens)
    finally:
        if pool is not None:
            pool.shutdown()

    result.final = ens
    return result


def mean_distance_observer(target: np.ndarray, n_batches: int = 20):
    """Observer: mean Euclidean distance to ``target`` plus batch means.

    Batch means over contiguous particle blocks feed the comparison error
    bars; summation order is fixed so results are worker-count independent.
    """
    target = np.asarray(target, dtype=float)

    def observe(e: Ensemble) -> dict:
        dist = np.linalg.norm(e.positions - target, axis=1)
        batches = np.array_split(dist, n_batches)
        return {
            "mean_dist": float(dist.mean()),
            "mean_dist_batches": [float(b.mean()) for b in batches if b.size],
        }

    return observe
