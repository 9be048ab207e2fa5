"""Euler-type schemes with taming transforms for Levy-driven McKean-Vlasov particle systems."""

from .measure import DiracBatch, EmpiricalMeasure, moment, w2_to_dirac0, wasserstein2_1d
from .models import (AssumptionReport, ModelSpec, build_model, custom_model, double_well,
                     sign_constants, verify_coercivity_small_p, verify_growth,
                     verify_monotonicity, volatility32)
from .noise import NoiseBundle, TimeGrid, coarsen, derive_stream, sample_bundle
from .simulate import (Explosion, ParticleEnsemble, RecordOptions, StepNoise, Trajectory,
                       simulate, simulate_coupled, step)
from .taming import (SCHEMES, TAMED_PRESETS, SchemeSpec, TamingOperator, apply, certify,
                     check_bound, check_diff, default_samples, operator, scheme)
from .convergence import (MseRecord, RateFit, convergence_study, fit_rate, poc_sweep,
                          rmse_terminal)

__version__ = "0.1.0"
