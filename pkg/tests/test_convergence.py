import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levymv import (Explosion, MseRecord, TimeGrid, convergence_study, custom_model, double_well,
                    fit_rate, poc_sweep, rmse_terminal, sample_bundle, scheme, volatility32)
from levymv.measure import EmpiricalMeasure, wasserstein2_1d
from levymv.simulate import ParticleEnsemble, simulate


def records(dts, rmses, diverged=None):
    diverged = diverged or [False] * len(dts)
    return [MseRecord(d, r, "s", "m", v) for d, r, v in zip(dts, rmses, diverged)]


def test_rmse_examples():
    assert rmse_terminal(np.zeros(2), np.array([3.0, 4.0])) == pytest.approx(math.sqrt(12.5))
    assert rmse_terminal(np.full(5, 0.1), np.zeros(5)) == pytest.approx(0.1)


def test_rmse_accepts_ensembles():
    g = TimeGrid(1.0, 1)
    a = ParticleEnsemble(np.array([[1.0, 0.0], [0.0, 0.0]]), 1, g)
    b = ParticleEnsemble(np.zeros((2, 2)), 1, g)
    assert rmse_terminal(a, b) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ValueError):
        rmse_terminal(np.zeros(3), np.zeros(4))


vectors = st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20)


@given(vectors, st.data())
def test_rmse_metric_properties(a, data):
    n = len(a)
    b = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n))
    c = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n))
    a, b, c = map(np.array, (a, b, c))
    assert rmse_terminal(a, a) == 0
    assert rmse_terminal(a, b) == rmse_terminal(b, a)
    assert rmse_terminal(a, c) <= rmse_terminal(a, b) + rmse_terminal(b, c) + 1e-9
    # per-coordinate coupling can only be worse than the sorted one
    assert wasserstein2_1d(EmpiricalMeasure(a), EmpiricalMeasure(b)) <= rmse_terminal(a, b) + 1e-9


@pytest.mark.parametrize("slope", [1.0, 0.5])
def test_fit_recovers_exact_power_law(slope):
    dts = [2.0 ** -k for k in range(3, 8)]
    fit = fit_rate(records(dts, [3 * d ** slope for d in dts]))
    assert fit.slope == pytest.approx(slope, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log2(3), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.points_used == 5


def test_fit_with_multiplicative_noise():
    rng = np.random.default_rng(0)
    dts = [2.0 ** -k for k in range(3, 9)]
    rmses = [d ** 0.5 * math.exp(rng.normal(scale=0.05)) for d in dts]
    assert 0.45 <= fit_rate(records(dts, rmses)).slope <= 0.55


def test_fit_skips_diverged_and_unusable_records():
    dts = [0.5, 0.25, 0.125, 0.0625]
    fit = fit_rate(records(dts, [math.nan, 0.5, 0.25, 0.0], [True, False, False, False]))
    assert fit.points_used == 2 and fit.slope == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_rate(records([0.5], [0.1]))
    with pytest.raises(ValueError):
        fit_rate(records([0.5, 0.5], [0.1, 0.2]))


def test_study_zero_dynamics_has_no_fit():
    recs, fit = convergence_study(custom_model("0", "0", "0", lam=2.0, x0=1.0), scheme("tanh"), 64,
                                  [2, 4, 8], N=10, repetitions=2)
    assert [r.rmse for r in recs] == [0.0, 0.0, 0.0]
    assert fit is None


def test_study_record_layout():
    recs, fit = convergence_study(volatility32(), scheme("tame"), 256, [1, 4, 16], N=20, repetitions=2)
    assert [r.dt for r in recs] == [2.0 ** -6, 2.0 ** -4]
    assert all(r.scheme == "tame" and r.model == "volatility32" for r in recs)
    assert fit.points_used == 2
    with pytest.raises(ValueError):
        convergence_study(volatility32(), scheme("tame"), 256, [3], N=5)
    with pytest.raises(ValueError):
        convergence_study(volatility32(), scheme("tame"), 256, [1], N=5)


def test_study_is_deterministic_across_worker_counts():
    args = (volatility32(), scheme("mix"), 256, [4, 8, 16])
    a = convergence_study(*args, N=30, repetitions=3, master_seed=5, workers=1)
    b = convergence_study(*args, N=30, repetitions=3, master_seed=5, workers=3)
    c = convergence_study(*args, N=30, repetitions=3, master_seed=5, workers=None)
    assert a == b == c


def test_study_marks_plain_divergence():
    recs, _ = convergence_study(double_well(), scheme("plain"), 256, [2, 32], N=50, repetitions=1)
    assert recs[-1].diverged and math.isnan(recs[-1].rmse)


def test_study_raises_when_everything_diverges():
    with pytest.raises(Explosion):
        convergence_study(custom_model("y * y * y", "0", x0=50.0), scheme("plain"), 16, [2, 4],
                          N=5, repetitions=1)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["plain", "tanh"])
def test_geometric_brownian_motion_has_order_one_half(name):
    gbm = custom_model("0.5 * y", "0.8 * y", "0", x0=1.0)
    _, fit = convergence_study(gbm, scheme(name), 2 ** 12, [2 ** k for k in range(4, 9)],
                               N=200, repetitions=4, master_seed=1)
    assert 0.4 <= fit.slope <= 0.6 and fit.r_squared > 0.95


def test_poc_zero_dynamics_is_exact():
    out = poc_sweep(custom_model("0", "0", "0", lam=1.0, x0=0.7), scheme("tanh"), [5, 10, 20], 16)
    assert out == [(5, 0.0), (10, 0.0)]


def test_poc_equal_sizes_share_noise():
    out = poc_sweep(volatility32(), scheme("tanh"), [30, 30], 32, master_seed=4)
    assert out == [(30, 0.0)]


def test_poc_same_particle_same_noise():
    g = TimeGrid(1.0, 8)
    small = sample_bundle(g, 5, 1, 2.0, None, 3)
    big = sample_bundle(g, 9, 1, 2.0, None, 3)
    assert np.array_equal(small.brownian, big.brownian[:5])
    assert all(np.array_equal(a, b) for a, b in zip(small.jump_times, big.jump_times))


def test_poc_input_validation():
    with pytest.raises(ValueError):
        poc_sweep(volatility32(), scheme("tanh"), [50], 16)
    with pytest.raises(ValueError):
        poc_sweep(volatility32(), scheme("tanh"), [100, 50], 16)
    m = volatility32()
    m.state_dim = 2
    with pytest.raises(ValueError):
        poc_sweep(m, scheme("tanh"), [5, 10], 16)


def test_poc_distance_matches_manual_subsample():
    from levymv.noise import PURPOSE_SUBSAMPLE, derive_stream
    m, sch, g = volatility32(), scheme("tame"), TimeGrid(1.0, 16)
    out = poc_sweep(m, sch, [4, 12], 16, master_seed=2)
    small = simulate(m, sch, g, sample_bundle(g, 4, 1, 2.0, None, 2)).terminal.states
    big = simulate(m, sch, g, sample_bundle(g, 12, 1, 2.0, None, 2)).terminal.states
    idx = np.sort(derive_stream(2, 0, 0, PURPOSE_SUBSAMPLE).choice(12, size=4, replace=False))
    assert out[0][1] == pytest.approx(wasserstein2_1d(EmpiricalMeasure(small), EmpiricalMeasure(big[idx])))
