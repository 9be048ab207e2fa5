"""Euler-type time stepping of the interacting particle system."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .measure import EmpiricalMeasure
from .models import ModelSpec
from .noise import (PURPOSE_COMPENSATOR, PURPOSE_INITIAL, NoiseBundle, TimeGrid,
                    coarsen, derive_stream)
from .taming import SchemeSpec, apply


class Explosion(ArithmeticError):
    """A particle state became non-finite: the scheme diverged."""

    def __init__(self, step: int, scheme: str = "", factor: Optional[int] = None):
        self.step = step
        self.scheme = scheme
        self.factor = factor
        where = f" (scheme={scheme}" + (f", factor={factor}" if factor is not None else "") + ")" \
            if scheme else ""
        super().__init__(f"non-finite particle state after step {step}{where}")


@dataclass(frozen=True)
class ParticleEnsemble:
    states: np.ndarray
    time_index: int
    grid: TimeGrid

    @property
    def time(self) -> float:
        return self.time_index * self.grid.dt

    @property
    def measure(self) -> EmpiricalMeasure:
        return EmpiricalMeasure(self.states)


@dataclass
class StepNoise:
    """Driving noise of a single step ``(t_k, t_{k+1}]``.

    ``jump_counts`` suffices for mark-free models; otherwise ``event_particles``
    and ``event_marks`` list each event, and ``compensator_marks`` holds the
    quadrature marks for the compensator.
    """

    dW: np.ndarray
    jump_counts: Optional[np.ndarray] = None
    event_particles: Optional[np.ndarray] = None
    event_marks: Optional[np.ndarray] = None
    compensator_marks: Optional[np.ndarray] = None


@dataclass
class RecordOptions:
    snapshot_indices: Optional[Iterable[int]] = None  # None: terminal only; "all" accepted
    moment_p: Optional[int] = None
    particles: Optional[int] = None  # keep only the first k particles in snapshots


@dataclass
class Trajectory:
    terminal: ParticleEnsemble
    snapshots: list = field(default_factory=list)
    moment_series: Optional[np.ndarray] = None


def _increment(states, t, dt, model: ModelSpec, scheme: SchemeSpec, noise: StepNoise):
    mu = EmpiricalMeasure(states)
    n = states.shape[0]

    out = apply(scheme.drift_op, model.drift(t, states, mu), dt) * dt

    g = model.diffusion(t, states, mu)  # (N, d, m)
    g_cols = apply(scheme.diffusion_op, np.swapaxes(g, 1, 2), dt)  # (N, m, d)
    out = out + np.einsum("nmd,nm->nd", g_cols, noise.dW)

    lam = model.intensity
    if model.mark_free:
        hv = apply(scheme.jump_op, model.jump(t, states, mu, None), dt)
        counts = noise.jump_counts if noise.jump_counts is not None else np.zeros(n)
        out = out + hv * (np.asarray(counts, dtype=float)[:, None] - lam * dt)
        return out

    if noise.event_particles is not None and len(noise.event_particles):
        p = noise.event_particles
        hv = apply(scheme.jump_op, model.jump(t, states[p], mu, noise.event_marks), dt)
        jumps = np.zeros_like(states)
        np.add.at(jumps, p, hv)
        out = out + jumps
    if lam > 0:
        comp = np.zeros_like(states)
        marks = noise.compensator_marks
        for v in marks:
            vv = np.broadcast_to(v, (n,) + np.shape(v))
            comp += apply(scheme.jump_op, model.jump(t, states, mu, vv), dt)
        out = out - dt * lam * comp / len(marks)
    return out


def step(ens: ParticleEnsemble, model: ModelSpec, scheme: SchemeSpec, noise: StepNoise) -> ParticleEnsemble:
    """Advance every particle by one step, all seeing the same frozen empirical measure."""
    k = ens.time_index
    if k >= ens.grid.steps:
        raise ValueError("ensemble is already at the terminal time")
    t = k * ens.grid.dt
    with np.errstate(over="ignore", invalid="ignore"):
        new = ens.states + _increment(ens.states, t, ens.grid.dt, model, scheme, noise)
    if not np.isfinite(new).all():
        raise Explosion(k, scheme.name)
    new.setflags(write=False)
    return ParticleEnsemble(new, k + 1, ens.grid)


def _check_noise(grid: TimeGrid, noise: NoiseBundle) -> int:
    if not np.isclose(noise.grid.horizon, grid.horizon, rtol=0, atol=1e-12 * grid.horizon):
        raise ValueError(f"noise horizon {noise.grid.horizon} != grid horizon {grid.horizon}")
    if noise.grid.steps % grid.steps:
        raise ValueError(f"noise grid ({noise.grid.steps} steps) does not refine {grid.steps} steps")
    return noise.grid.steps // grid.steps


def initial_ensemble(model: ModelSpec, grid: TimeGrid, noise: NoiseBundle) -> ParticleEnsemble:
    rng = None
    if model.initial_sampler is not None:
        rng = derive_stream(noise.master_seed, noise.path_id, 0, PURPOSE_INITIAL)
    states = model.initial_states(noise.num_particles, rng)
    states.setflags(write=False)
    return ParticleEnsemble(states, 0, grid)


def _step_noises(model: ModelSpec, grid: TimeGrid, noise: NoiseBundle):
    """Yield the StepNoise of each step of ``grid`` (``noise`` already on ``grid``)."""
    if model.mark_free:
        counts = noise.jump_counts(grid)
        for k in range(grid.steps):
            yield StepNoise(noise.brownian[:, k, :], jump_counts=counts[:, k])
        return
    offsets, particles, marks = noise.events_by_step(grid)
    comp_rng = derive_stream(noise.master_seed, noise.path_id, 0, PURPOSE_COMPENSATOR)
    for k in range(grid.steps):
        sl = slice(offsets[k], offsets[k + 1])
        comp = np.asarray(model.mark_sampler(comp_rng, model.compensator_samples))
        yield StepNoise(noise.brownian[:, k, :], event_particles=particles[sl],
                        event_marks=marks[sl], compensator_marks=comp)


def simulate(model: ModelSpec, scheme: SchemeSpec, grid: TimeGrid, noise: NoiseBundle,
             record: Optional[RecordOptions] = None,
             initial: Optional[ParticleEnsemble] = None) -> Trajectory:
    """Run the scheme over ``grid``, coarsening ``noise`` to it first."""
    factor = _check_noise(grid, noise)
    if noise.brownian_dim != model.brownian_dim:
        raise ValueError("noise Brownian dimension does not match the model")
    noise = coarsen(noise, factor)
    record = record or RecordOptions()
    ens = initial if initial is not None else initial_ensemble(model, grid, noise)
    ens = ParticleEnsemble(ens.states, 0, grid)

    if record.snapshot_indices == "all":
        wanted = set(range(grid.steps + 1))
    else:
        wanted = set(record.snapshot_indices or ())
    keep = slice(None) if record.particles is None else slice(0, record.particles)
    snapshots = []
    moments = np.empty(grid.steps + 1) if record.moment_p else None

    def observe(e):
        if e.time_index in wanted:
            snapshots.append(ParticleEnsemble(e.states[keep], e.time_index, grid))
        if moments is not None:
            moments[e.time_index] = e.measure.moment(record.moment_p)

    observe(ens)
    for sn in _step_noises(model, grid, noise):
        ens = step(ens, model, scheme, sn)
        observe(ens)
    return Trajectory(ens, snapshots, moments)


def simulate_coupled(model: ModelSpec, scheme: SchemeSpec, fine_grid: TimeGrid,
                     coarse_factors: Iterable[int], noise: NoiseBundle,
                     N: Optional[int] = None, strict: bool = True) -> dict:
    """Terminal ensembles at several step sizes driven by one noise bundle.

    Factor 1 is always included.  With ``strict=False`` a diverged factor maps
    to its :class:`Explosion` instead of raising.
    """
    if noise.grid != fine_grid:
        raise ValueError("noise must be sampled on the fine grid")
    if N is not None and N != noise.num_particles:
        raise ValueError(f"noise carries {noise.num_particles} particles, expected {N}")
    factors = sorted(set(int(f) for f in coarse_factors) | {1})
    for f in factors:
        if fine_grid.steps % f:
            raise ValueError(f"factor {f} does not divide {fine_grid.steps} steps")
    initial = initial_ensemble(model, fine_grid, noise)
    out = {}
    for f in factors:
        grid = fine_grid.coarsen(f)
        try:
            out[f] = simulate(model, scheme, grid, noise, initial=initial).terminal
        except Explosion as exc:
            tagged = Explosion(exc.step, scheme.name, f)
            if strict:
                raise tagged from exc
            out[f] = tagged
    return out
