"""Coefficient sets (drift, diffusion, jump) and sampled assumption checks.

Coefficients are vectorised over a batch of states.  With ``y`` of shape
``(K, d)`` and a measure-like ``mu`` exposing ``mean()`` (an
:class:`~levymv.measure.EmpiricalMeasure` or a
:class:`~levymv.measure.DiracBatch`):

* ``drift(t, y, mu)`` returns ``(K, d)``
* ``diffusion(t, y, mu)`` returns ``(K, d, m)``; column ``j`` is ``g_j``
* ``jump(t, y, mu, v)`` returns ``(K, d)``; ``v`` holds one mark per row,
  or is ``None`` for mark-free models
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .measure import DiracBatch
from .noise import MarkSampler, constant_marks


@dataclass
class ModelSpec:
    name: str
    state_dim: int
    brownian_dim: int
    drift: Callable
    diffusion: Callable
    jump: Callable
    intensity: float
    mark_sampler: MarkSampler = field(default_factory=constant_marks)
    mark_free: bool = True
    compensator_samples: int = 64
    x0: float = 0.5
    initial_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    horizon: float = 1.0
    params: dict = field(default_factory=dict)
    declared: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.intensity) and self.intensity >= 0):
            raise ValueError(f"intensity must be finite and non-negative, got {self.intensity}")

    @property
    def compensator_mode(self) -> str:
        return "exact_mark_free" if self.mark_free else f"monte_carlo({self.compensator_samples})"

    def initial_states(self, num_particles: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        if self.initial_sampler is not None:
            if rng is None:
                raise ValueError("a random initial law needs a generator")
            x = np.asarray(self.initial_sampler(rng, num_particles), dtype=float)
            return x.reshape(num_particles, self.state_dim)
        return np.broadcast_to(np.asarray(self.x0, dtype=float),
                               (num_particles, self.state_dim)).copy()


def _mean_of(mu):
    return np.asarray(mu.mean(), dtype=float)


def volatility32(a1: float = 6.0, a2: float = 2.0, b: float = -0.1, c: float = 1.0,
                 lam: float = 2.0, x0: float = 0.5, eta: float = 1.5) -> ModelSpec:
    """Jump-extended 3/2-volatility model with mean-field interaction.

    f = a1 (y (a2 - |y|) + E y),  g = b (|y|^{3/2} + E y),  h = c (1 - y - E y).
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")

    def drift(t, y, mu):
        return a1 * (y * (a2 - np.abs(y)) + _mean_of(mu))

    def diffusion(t, y, mu):
        return (b * (np.abs(y) ** 1.5 + _mean_of(mu)))[..., None]

    def jump(t, y, mu, v=None):
        return c * (1.0 - y - _mean_of(mu))

    declared = {
        "growth_gamma": 1.0,
        "growth_C": 2 * a1,
        "mono_eta": eta,
        "mono_C": a1 + 2 * a1 * a2 + 2 * eta * b ** 2 + 2 * eta * c ** 2 * lam,
    }
    return ModelSpec("volatility32", 1, 1, drift, diffusion, jump, lam, x0=x0,
                     params=dict(a1=a1, a2=a2, b=b, c=c, lam=lam, x0=x0, eta=eta),
                     declared=declared)


def double_well(d1: float = 66.0, d2: float = 0.19, d3: float = 0.0006,
                lam: float = 2.0, x0: float = 0.5, eta: float = 1.5) -> ModelSpec:
    """Jump-extended double-well model with mean-field interaction.

    f = d1 (y (1 - y^2) + E y),  g = d2 (1 - y^2 - E y),  h = d3 (y ln(1 + y^2) + E y).
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")

    def drift(t, y, mu):
        return d1 * (y * (1.0 - y * y) + _mean_of(mu))

    def diffusion(t, y, mu):
        return (d2 * (1.0 - y * y - _mean_of(mu)))[..., None]

    def jump(t, y, mu, v=None):
        return d3 * (y * np.log1p(y * y) + _mean_of(mu))

    declared = {
        "growth_gamma": 2.0,
        "growth_C": 6 * d1,
        "mono_eta": eta,
        "mono_C": 3 * d1 + 4 * lam * eta * d2 ** 2,
    }
    return ModelSpec("double_well", 1, 1, drift, diffusion, jump, lam, x0=x0,
                     params=dict(d1=d1, d2=d2, d3=d3, lam=lam, x0=x0, eta=eta),
                     declared=declared)


# ---------------------------------------------------------------------------
# custom models from arithmetic expressions over (t, y, mean)

_FUNCS = {
    "abs": np.abs,
    "ln": np.log,
    "pow": np.power,
    "tanh": np.tanh,
    "sin": np.sin,
}
_NAMES = {"t", "y", "mean"}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


class ExpressionError(ValueError):
    pass


def compile_expression(src: str) -> Callable:
    """Compile ``src`` into ``fn(t, y, mean)``.

    Accepted: numbers, the names ``t``, ``y``, ``mean``, ``+ - * /`` (and
    ``**`` as a synonym for ``pow``), unary minus, and calls to ``abs``,
    ``ln``, ``pow``, ``tanh``, ``sin``.
    """
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        src = repr(src)
    if not isinstance(src, str):
        raise ExpressionError(f"expression must be a string, got {type(src).__name__}")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {src!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            value = float(node.value)
            return lambda env: value
        if isinstance(node, ast.Name):
            if node.id not in _NAMES:
                raise ExpressionError(f"unknown name {node.id!r} in {src!r}")
            key = node.id
            return lambda env: env[key]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda env: -inner(env)
            return inner
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            fn = _BINOPS[type(node.op)]
            lhs, rhs = build(node.left), build(node.right)
            return lambda env: fn(lhs(env), rhs(env))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and not node.keywords:
            fn = _FUNCS[node.func.id]
            args = [build(a) for a in node.args]
            expected = 2 if node.func.id == "pow" else 1
            if len(args) != expected:
                raise ExpressionError(f"{node.func.id} takes {expected} argument(s)")
            return lambda env: fn(*(a(env) for a in args))
        raise ExpressionError(f"unsupported syntax {type(node).__name__} in {src!r}")

    evaluator = build(tree)

    def fn(t, y, mean):
        return evaluator({"t": t, "y": y, "mean": mean})

    fn.source = src
    return fn


def custom_model(drift: str, diffusion: str, jump: str = "0", lam: float = 0.0,
                 x0: float = 0.0, name: str = "custom", declared: Optional[dict] = None,
                 horizon: float = 1.0) -> ModelSpec:
    """Scalar (d = m = 1), mark-free model from expression strings."""
    f_expr, g_expr, h_expr = (compile_expression(s) for s in (drift, diffusion, jump))

    def coefficient(expr, column=False):
        def fn(t, y, mu, v=None):
            out = np.broadcast_to(np.asarray(expr(t, y, _mean_of(mu)), dtype=float), y.shape)
            return out[..., None] if column else out
        return fn

    f, g, h = coefficient(f_expr), coefficient(g_expr, column=True), coefficient(h_expr)

    return ModelSpec(name, 1, 1, f, g, h, float(lam), x0=x0, horizon=horizon,
                     params=dict(drift=drift, diffusion=diffusion, jump=jump, lam=lam, x0=x0),
                     declared=dict(declared or {}))


BUILTIN_MODELS = {"volatility32": volatility32, "double_well": double_well}


def build_model(name: str, **overrides) -> ModelSpec:
    if name == "custom":
        return custom_model(**overrides)
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; expected one of "
                         f"{sorted(BUILTIN_MODELS) + ['custom']}") from None
    return factory(**overrides)


# ---------------------------------------------------------------------------
# sampled assumption checks


@dataclass(frozen=True)
class AssumptionReport:
    assumption_id: str
    samples_used: int
    max_ratio_or_violation: float
    claimed_constant: float
    passed: bool
    box: tuple = ()
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.assumption_id}: sampled={self.max_ratio_or_violation:.6g} "
                f"claimed={self.claimed_constant:.6g} samples={self.samples_used} "
                f"box={list(self.box)}" + (f" ({self.note})" if self.note else ""))


def sign_constants(model: ModelSpec) -> list:
    """Dissipativity combinations the built-in models rely on; each must be negative."""
    p = model.params
    if model.name == "volatility32":
        a1, b, eta = p["a1"], p["b"], p["eta"]
        p_bar = 297
        return [
            ("-4*a1 + 9/2*eta*b^2", -4 * a1 + 4.5 * eta * b ** 2),
            (f"-a1 + b^2*(2*p_bar - 1) [p_bar={p_bar}]", -a1 + b ** 2 * (2 * p_bar - 1)),
        ]
    if model.name == "double_well":
        d1, d2, d3, lam, eta = p["d1"], p["d2"], p["d3"], p["lam"], p["eta"]
        p_bar, theta = 1641, 0.1144
        # d3^{2p} p^{2p} under/overflows directly; evaluate in log space
        tail = (1 + (2 * p_bar - 2) * theta) * lam * (1 + theta) * \
            math.exp(2 * p_bar * math.log(d3 * p_bar)) if d3 > 0 else 0.0
        return [
            ("-6*d1 + 8*eta*d2^2 + 2*lam*eta*d3^2",
             -6 * d1 + 8 * eta * d2 ** 2 + 2 * lam * eta * d3 ** 2),
            (f"-2*d1*p_bar + d2^2*(1+theta)*p_bar*(2*p_bar-1) + ... [p_bar={p_bar}, theta={theta}]",
             -2 * d1 * p_bar + d2 ** 2 * (1 + theta) * p_bar * (2 * p_bar - 1) + tail),
        ]
    raise ValueError(f"no declared sign constants for model {model.name!r}")


def _sample_pairs(box, num_samples, stream, dim):
    lo, hi = box
    draws = stream.uniform(lo, hi, (4, num_samples, dim))
    return draws[0], draws[1], draws[2], draws[3]


def _jump_sq_moment(model, t, y, mu, ybar, mubar, stream, power=2):
    """``lambda * E_v |h(y, mu, v) - h(ybar, mubar, v)|^power`` (mu/mubar may be None
    for a single-argument moment)."""
    if model.intensity == 0:
        return np.zeros(y.shape[0])
    if model.mark_free:
        hv = model.jump(t, y, mu, None)
        if ybar is not None:
            hv = hv - model.jump(t, ybar, mubar, None)
        return model.intensity * np.sum(hv ** 2, axis=1) ** (power / 2)
    acc = np.zeros(y.shape[0])
    q = model.compensator_samples
    for _ in range(q):
        v = model.mark_sampler(stream, y.shape[0])
        hv = model.jump(t, y, mu, v)
        if ybar is not None:
            hv = hv - model.jump(t, ybar, mubar, v)
        acc += np.sum(hv ** 2, axis=1) ** (power / 2)
    return model.intensity * acc / q


def monotonicity_ratios(model: ModelSpec, eta: float, y, ybar, a, abar, t: float = 0.0,
                        stream=None) -> tuple:
    """Per-sample LHS of the coupled monotonicity inequality and its denominator."""
    mu, mubar = DiracBatch(a), DiracBatch(abar)
    df = model.drift(t, y, mu) - model.drift(t, ybar, mubar)
    dg = model.diffusion(t, y, mu) - model.diffusion(t, ybar, mubar)
    lhs = 2 * np.sum((y - ybar) * df, axis=1) + eta * np.sum(dg ** 2, axis=(1, 2))
    lhs = lhs + eta * _jump_sq_moment(model, t, y, mu, ybar, mubar, stream)
    denom = np.sum((y - ybar) ** 2, axis=1) + np.sum((a - abar) ** 2, axis=1)
    return lhs, denom


def verify_monotonicity(model: ModelSpec, eta: float, claimed_C: float, box=(-5.0, 5.0),
                        num_samples: int = 100_000,
                        stream: Optional[np.random.Generator] = None) -> AssumptionReport:
    """Sampled sup of the (enhanced) coupled monotonicity ratio.

    Measures are point masses ``delta_a``, so ``W2(delta_a, delta_abar) = |a - abar|``
    exactly.  Pairs with denominator below 1e-12 are skipped.
    """
    if eta < 1:
        raise ValueError("eta must be >= 1")
    if num_samples < 1:
        raise ValueError("num_samples must be positive")
    stream = stream if stream is not None else np.random.default_rng(0)
    y, ybar, a, abar = _sample_pairs(box, num_samples, stream, model.state_dim)
    lhs, denom = monotonicity_ratios(model, eta, y, ybar, a, abar, stream=stream)
    keep = denom >= 1e-12
    worst = float(np.max(lhs[keep] / denom[keep])) if keep.any() else -math.inf
    return AssumptionReport(f"monotonicity(eta={eta})", int(keep.sum()), worst,
                            float(claimed_C), worst <= claimed_C, tuple(box))


def verify_growth(model: ModelSpec, gamma: float, claimed_C: float, box=(-5.0, 5.0),
                  num_samples: int = 100_000,
                  stream: Optional[np.random.Generator] = None) -> AssumptionReport:
    """Sampled sup of ``|f(y, a) - f(ybar, abar)| / ((1+|y|^g+|ybar|^g)|y-ybar| + |a-abar|)``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    stream = stream if stream is not None else np.random.default_rng(0)
    y, ybar, a, abar = _sample_pairs(box, num_samples, stream, model.state_dim)
    df = model.drift(0.0, y, DiracBatch(a)) - model.drift(0.0, ybar, DiracBatch(abar))
    ny, nyb = np.linalg.norm(y, axis=1), np.linalg.norm(ybar, axis=1)
    denom = (1 + ny ** gamma + nyb ** gamma) * np.linalg.norm(y - ybar, axis=1) \
        + np.linalg.norm(a - abar, axis=1)
    keep = denom >= 1e-12
    ratio = np.linalg.norm(df, axis=1)[keep] / denom[keep]
    worst = float(np.max(ratio)) if ratio.size else -math.inf
    return AssumptionReport(f"growth(gamma={gamma})", int(keep.sum()), worst,
                            float(claimed_C), worst <= claimed_C, tuple(box))


def verify_coercivity_small_p(model: ModelSpec, p_bar: int = 1, theta: float = 1.0,
                              box=(-5.0, 5.0), num_samples: int = 100_000,
                              stream: Optional[np.random.Generator] = None) -> AssumptionReport:
    """Fit the smallest coercivity constant on the box at a small exponent ``p_bar``.

    The reported value is ``max(LHS - C (1 + |y|^{2p} + W2^{2p}(delta_a, delta_0)))``
    with ``C`` the fitted constant, so it is ``<= 0`` whenever ``C`` is finite.
    """
    if p_bar not in (1, 2, 3):
        raise ValueError("p_bar must be 1, 2 or 3 (larger exponents overflow)")
    stream = stream if stream is not None else np.random.default_rng(0)
    y, _, a, _ = _sample_pairs(box, num_samples, stream, model.state_dim)
    mu = DiracBatch(a)
    ny2 = np.sum(y ** 2, axis=1)
    lhs = 2 * p_bar * ny2 ** (p_bar - 1) * np.sum(y * model.drift(0.0, y, mu), axis=1) \
        + p_bar * (2 * p_bar - 1) * ny2 ** (p_bar - 1) * np.sum(model.diffusion(0.0, y, mu) ** 2, axis=(1, 2)) \
        + (1 + (2 * p_bar - 2) * theta) * _jump_sq_moment(model, 0.0, y, mu, None, None, stream,
                                                          power=2 * p_bar)
    denom = 1 + ny2 ** p_bar + mu.w2_to_dirac0() ** (2 * p_bar)
    fitted = max(float(np.max(lhs / denom)), 0.0)
    violation = float(np.max(lhs - fitted * denom))
    finite = math.isfinite(fitted)
    return AssumptionReport(f"coercivity(p_bar={p_bar}, theta={theta})", num_samples, violation,
                            0.0, finite and violation <= 0, tuple(box), note=f"fitted C={fitted:.6g}")
