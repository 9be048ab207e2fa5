"""Driving noise for particle systems: Brownian increments plus compound-Poisson jumps.

Noise is always sampled on the finest grid in play and coarsened by exact
summation, so runs at several step sizes see the same underlying paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

MarkSampler = Callable[[np.random.Generator, int], np.ndarray]

# spawn-key tags separating the independent uses of one (seed, path, particle) key
PURPOSE_PATH = 0
PURPOSE_INITIAL = 1
PURPOSE_COMPENSATOR = 2
PURPOSE_SUBSAMPLE = 3

_DUMP_MAGIC = "levymv-bundle"
_DUMP_VERSION = 1


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of ``[0, horizon]`` into ``steps`` intervals."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def refine(self, k: int) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * k)

    def coarsen(self, factor: int) -> "TimeGrid":
        if factor < 1 or self.steps % factor:
            raise ValueError(f"factor {factor} does not divide {self.steps} steps")
        return TimeGrid(self.horizon, self.steps // factor)

    def step_of(self, times: np.ndarray) -> np.ndarray:
        """Index k of the step ``(t_k, t_{k+1}]`` containing each time."""
        k = np.ceil(np.asarray(times, dtype=float) * self.steps / self.horizon).astype(np.int64) - 1
        return np.clip(k, 0, self.steps - 1)


def derive_stream(master_seed: int, path_id: int, particle_id: int,
                  purpose: int = PURPOSE_PATH) -> np.random.Generator:
    """Counter-based generator keyed on (seed, path, particle, purpose).

    The key goes through ``SeedSequence`` spawn keys, so distinct keys give
    statistically independent Philox streams and no key depends on the order
    in which streams are requested.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(path_id), int(particle_id), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


def constant_marks(value: float = 1.0) -> MarkSampler:
    """Mark sampler returning a fixed scalar mark (mark-free models)."""
    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(value))
    return sample


def normal_marks(loc: float = 0.0, scale: float = 1.0) -> MarkSampler:
    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(loc, scale, size)
    return sample


@dataclass(frozen=True)
class NoiseBundle:
    """Per-particle Brownian increments and jump events on ``grid``.

    ``brownian`` has shape ``(N, steps, m)``.  ``jump_times[i]`` is sorted and
    lies in ``(0, horizon]``; ``jump_marks[i]`` holds the matching marks.
    """

    grid: TimeGrid
    brownian: np.ndarray
    jump_times: tuple
    jump_marks: tuple
    master_seed: int
    intensity: float
    path_id: int = 0
    _counts_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_particles(self) -> int:
        return self.brownian.shape[0]

    @property
    def brownian_dim(self) -> int:
        return self.brownian.shape[2]

    def jump_counts(self, grid: Optional[TimeGrid] = None) -> np.ndarray:
        """Number of events per particle per step of ``grid``, shape ``(N, steps)``."""
        grid = grid or self.grid
        if grid.steps not in self._counts_cache:
            counts = np.zeros((self.num_particles, grid.steps), dtype=np.int64)
            for i, times in enumerate(self.jump_times):
                if len(times):
                    np.add.at(counts[i], grid.step_of(times), 1)
            counts.setflags(write=False)
            self._counts_cache[grid.steps] = counts
        return self._counts_cache[grid.steps]

    def events_by_step(self, grid: Optional[TimeGrid] = None):
        """Flattened events grouped by step.

        Returns ``(offsets, particles, marks)``; the events of step ``k`` are
        ``particles[offsets[k]:offsets[k+1]]`` with the matching marks.
        """
        grid = grid or self.grid
        particles, steps, marks = [], [], []
        for i, (times, mk) in enumerate(zip(self.jump_times, self.jump_marks)):
            if len(times):
                particles.append(np.full(len(times), i, dtype=np.int64))
                steps.append(grid.step_of(times))
                marks.append(np.asarray(mk))
        if not particles:
            return np.zeros(grid.steps + 1, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0)
        particles = np.concatenate(particles)
        steps = np.concatenate(steps)
        marks = np.concatenate(marks)
        order = np.argsort(steps, kind="stable")
        offsets = np.searchsorted(steps[order], np.arange(grid.steps + 1), side="left")
        return offsets, particles[order], marks[order]


def sample_bundle(grid: TimeGrid, num_particles: int, brownian_dim: int, intensity: float,
                  mark_sampler: Optional[MarkSampler], master_seed: int,
                  path_id: int = 0) -> NoiseBundle:
    """Sample independent drivers for ``num_particles`` particles.

    Particle ``i`` draws everything from ``derive_stream(master_seed, path_id, i)``:
    first its Brownian increments, then its Poisson count, jump times and marks.
    Particle ``i`` therefore sees the same noise whatever ``num_particles`` is.
    """
    intensity = float(intensity)
    if not math.isfinite(intensity):
        raise ValueError(f"intensity must be finite (finite-activity jumps only), got {intensity}")
    if intensity < 0:
        raise ValueError(f"intensity must be non-negative, got {intensity}")
    if num_particles < 1 or brownian_dim < 1:
        raise ValueError("num_particles and brownian_dim must be positive")
    mark_sampler = mark_sampler or constant_marks()

    sqdt = math.sqrt(grid.dt)
    brownian = np.empty((num_particles, grid.steps, brownian_dim))
    times_all, marks_all = [], []
    for i in range(num_particles):
        rng = derive_stream(master_seed, path_id, i)
        brownian[i] = rng.standard_normal((grid.steps, brownian_dim)) * sqdt
        k = int(rng.poisson(intensity * grid.horizon)) if intensity > 0 else 0
        # T - U[0, T) lands in (0, T], matching the (t_k, t_{k+1}] binning
        times = np.sort(grid.horizon - rng.uniform(0.0, grid.horizon, k))
        marks = np.asarray(mark_sampler(rng, k))
        if len(marks) != k:
            raise ValueError("mark sampler returned the wrong number of marks")
        times.setflags(write=False)
        marks.setflags(write=False)
        times_all.append(times)
        marks_all.append(marks)
    brownian.setflags(write=False)
    return NoiseBundle(grid, brownian, tuple(times_all), tuple(marks_all),
                       int(master_seed), intensity, int(path_id))


def coarsen(bundle: NoiseBundle, factor: int) -> NoiseBundle:
    """Merge every ``factor`` consecutive fine steps into one coarse step.

    Coarse increments are the fine increments summed in ascending time order;
    jump events are shared as-is.
    """
    if int(factor) != factor or factor < 1 or bundle.grid.steps % factor:
        raise ValueError(f"factor {factor} does not divide {bundle.grid.steps} steps")
    factor = int(factor)
    if factor == 1:
        return bundle
    n_coarse = bundle.grid.steps // factor
    fine = bundle.brownian.reshape(bundle.num_particles, n_coarse, factor, bundle.brownian_dim)
    acc = fine[:, :, 0, :].copy()
    for j in range(1, factor):
        acc += fine[:, :, j, :]
    acc.setflags(write=False)
    return NoiseBundle(bundle.grid.coarsen(factor), acc, bundle.jump_times, bundle.jump_marks,
                       bundle.master_seed, bundle.intensity, bundle.path_id)


def dump_bundle(bundle: NoiseBundle, path) -> None:
    """Write a bundle to an ``.npz`` container with a versioned header."""
    arrays = {
        "header": np.array([_DUMP_MAGIC, str(_DUMP_VERSION)]),
        "grid": np.array([bundle.grid.horizon, bundle.grid.steps], dtype=float),
        "meta": np.array([bundle.master_seed, bundle.path_id], dtype=np.int64),
        "intensity": np.array(bundle.intensity),
        "brownian": bundle.brownian,
        "jump_lengths": np.array([len(t) for t in bundle.jump_times], dtype=np.int64),
        "jump_times": np.concatenate(bundle.jump_times) if bundle.jump_times else np.zeros(0),
        "jump_marks": np.concatenate(bundle.jump_marks) if bundle.jump_marks else np.zeros(0),
    }
    np.savez(path, **arrays)


def load_bundle(path) -> NoiseBundle:
    with np.load(path, allow_pickle=False) as data:
        header = [str(x) for x in data["header"]]
        if header[0] != _DUMP_MAGIC or int(header[1]) != _DUMP_VERSION:
            raise ValueError(f"unsupported bundle container: {header}")
        horizon, steps = data["grid"]
        seed, path_id = (int(x) for x in data["meta"])
        lengths = data["jump_lengths"]
        splits = np.cumsum(lengths)[:-1]
        times = tuple(np.split(data["jump_times"], splits))
        marks = tuple(np.split(data["jump_marks"], splits))
        brownian = np.array(data["brownian"])
        intensity = float(data["intensity"])
    brownian.setflags(write=False)
    return NoiseBundle(TimeGrid(float(horizon), int(steps)), brownian, times, marks,
                       seed, intensity, path_id)
