"""Strong-error estimation over coupled step sizes and the particle-count sweep."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .measure import EmpiricalMeasure, wasserstein2_1d
from .models import ModelSpec
from .noise import PURPOSE_SUBSAMPLE, TimeGrid, derive_stream, sample_bundle
from .simulate import Explosion, ParticleEnsemble, simulate, simulate_coupled
from .taming import SchemeSpec


@dataclass(frozen=True)
class MseRecord:
    dt: float
    rmse: float
    scheme: str
    model: str
    diverged: bool = False


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points_used: int


def _states(e) -> np.ndarray:
    return e.states if isinstance(e, ParticleEnsemble) else np.asarray(e, dtype=float)


def rmse_terminal(reference, approx) -> float:
    """``sqrt((1/N) sum_i |Y_ref^i - Y^i|^2)`` between coupled terminal ensembles."""
    a, b = _states(reference), _states(approx)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise ValueError(f"ensemble shapes differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def fit_rate(records: Iterable[MseRecord]) -> RateFit:
    """Least-squares line through ``(log2 dt, log2 rmse)`` of the usable records."""
    usable = [r for r in records if not r.diverged and math.isfinite(r.rmse) and r.rmse > 0]
    if len({r.dt for r in usable}) < 2:
        raise ValueError("need at least two non-diverged records with distinct dt and rmse > 0")
    x = np.log2([r.dt for r in usable])
    y = np.log2([r.rmse for r in usable])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), len(usable))


def _one_repetition(model, scheme, fine_grid, factors, N, master_seed, rep):
    noise = sample_bundle(fine_grid, N, model.brownian_dim, model.intensity, model.mark_sampler,
                          master_seed, path_id=rep)
    terminals = simulate_coupled(model, scheme, fine_grid, factors, noise, strict=False)
    ref = terminals[1]
    errors = {}
    for f in factors:
        out = terminals[f]
        if isinstance(ref, Explosion) or isinstance(out, Explosion):
            errors[f] = math.nan
        else:
            errors[f] = rmse_terminal(ref, out)
    return errors


def convergence_study(model: ModelSpec, scheme: SchemeSpec, fine_steps: int,
                      coarse_factors: Sequence[int], N: int, repetitions: int = 4,
                      master_seed: int = 0, workers: Optional[int] = 1,
                      horizon: Optional[float] = None):
    """RMSE of each coarse step size against the finest grid, plus the fitted order.

    Each repetition samples a fresh N-particle system (path id = repetition
    index); per-factor errors are combined across repetitions by root mean
    square.  Diverged factors yield ``diverged=True`` records.
    """
    fine_grid = TimeGrid(horizon if horizon is not None else model.horizon, fine_steps)
    factors = [int(f) for f in coarse_factors if int(f) != 1]
    for f in factors:
        if fine_steps % f:
            raise ValueError(f"factor {f} does not divide {fine_steps} steps")
    if not factors:
        raise ValueError("need at least one coarse factor > 1")

    def run(rep):
        return _one_repetition(model, scheme, fine_grid, factors, N, master_seed, rep)

    if workers is None or workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(run, range(repetitions)))
    else:
        per_rep = [run(r) for r in range(repetitions)]

    records = []
    for f in factors:
        errs = np.array([e[f] for e in per_rep])
        diverged = bool(np.isnan(errs).any())
        rmse = math.nan if diverged else float(np.sqrt(np.mean(errs ** 2)))
        records.append(MseRecord(fine_grid.dt * f, rmse, scheme.name, model.name, diverged))
    if all(r.diverged for r in records):
        raise Explosion(-1, scheme.name)
    try:
        fit = fit_rate(records)
    except ValueError:
        fit = None
    return records, fit


def poc_sweep(model: ModelSpec, scheme: SchemeSpec, N_list: Sequence[int], fine_steps: int,
              master_seed: int = 0, horizon: Optional[float] = None) -> list:
    """W2 distance from each terminal law to the largest-N terminal law.

    Particle ``i`` is driven by the same noise for every N.  The larger
    ensemble is uniformly subsampled (without replacement) down to the
    smaller size before the exact 1-D distance is taken.  The largest entry
    itself is not reported.
    """
    if model.state_dim != 1:
        raise ValueError("poc_sweep needs one-dimensional states")
    N_list = [int(n) for n in N_list]
    if len(N_list) < 2:
        raise ValueError("N_list needs at least two entries")
    if any(b < a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be ascending")
    grid = TimeGrid(horizon if horizon is not None else model.horizon, fine_steps)

    def terminal(n):
        noise = sample_bundle(grid, n, model.brownian_dim, model.intensity, model.mark_sampler,
                              master_seed, path_id=0)
        return simulate(model, scheme, grid, noise).terminal.states

    largest = terminal(N_list[-1])
    rng = derive_stream(master_seed, 0, 0, PURPOSE_SUBSAMPLE)
    out = []
    for n in N_list[:-1]:
        states = terminal(n)
        ref = largest
        if n < len(largest):
            ref = largest[np.sort(rng.choice(len(largest), size=n, replace=False))]
        out.append((n, wasserstein2_1d(EmpiricalMeasure(states), EmpiricalMeasure(ref))))
    return out
