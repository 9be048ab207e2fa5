"""Taming transforms applied to drift, diffusion columns and jump coefficients.

Each transform maps a coefficient value ``z`` (last axis = state dimension)
and a step size ``dt`` to a bounded surrogate.  ``tanh`` and ``sine`` act
componentwise, ``tame`` rescales by the Euclidean norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

KINDS = ("identity", "tanh", "tame", "sine")


@dataclass(frozen=True)
class TamingOperator:
    kind: str
    alpha: Optional[float] = 1.0
    delta: Optional[float] = 1.0
    gamma_exp: Optional[float] = 2.0
    const_C: Optional[float] = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown taming kind {self.kind!r}; expected one of {KINDS}")

    @property
    def certified(self) -> bool:
        return self.kind != "identity"

    def __call__(self, z, dt: float) -> np.ndarray:
        return apply(self, z, dt)


IDENTITY = TamingOperator("identity", None, None, None, None)
TANH = TamingOperator("tanh")
TAME = TamingOperator("tame")
SINE = TamingOperator("sine")

OPERATORS = {"identity": IDENTITY, "tanh": TANH, "tame": TAME, "sine": SINE}


def operator(kind: str) -> TamingOperator:
    try:
        return OPERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown taming kind {kind!r}") from None


def apply(op: TamingOperator, z, dt: float) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if op.kind == "identity":
        return z
    if op.kind == "tanh":
        return np.tanh(dt * z) / dt
    if op.kind == "sine":
        return np.sin(dt * z) / dt
    # tame
    if z.ndim == 0:
        return z / (1.0 + dt * np.abs(z))
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    return z / (1.0 + dt * norm)


@dataclass(frozen=True)
class SchemeSpec:
    """Operators for drift, each diffusion column, and the jump coefficient."""

    drift_op: TamingOperator
    diffusion_op: TamingOperator
    jump_op: TamingOperator
    name: str


SCHEMES = {
    "tanh": SchemeSpec(TANH, TANH, TANH, "tanh"),
    "tame": SchemeSpec(TAME, TAME, TAME, "tame"),
    "sine": SchemeSpec(SINE, SINE, SINE, "sine"),
    "mix": SchemeSpec(SINE, TAME, TANH, "mix"),
    "plain": SchemeSpec(IDENTITY, IDENTITY, IDENTITY, "plain"),
}

TAMED_PRESETS = ("tanh", "tame", "sine", "mix")


def scheme(name: str) -> SchemeSpec:
    try:
        return SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; expected one of {sorted(SCHEMES)}") from None


@dataclass(frozen=True)
class CheckReport:
    kind: str
    max_violation: float
    samples_used: int

    @property
    def passed(self) -> bool:
        return self.max_violation <= 0.0


def default_samples(num_samples: int = 100_000, dim: int = 1, zmax: float = 1e3,
                    kmax: int = 12, rng: Optional[np.random.Generator] = None):
    """Sample box used for operator certificates: ``z`` uniform in
    ``[-zmax, zmax]^dim`` paired with ``dt`` drawn from ``{2^-1, ..., 2^-kmax}``.
    The origin is always included."""
    rng = rng if rng is not None else np.random.default_rng(0)
    z = rng.uniform(-zmax, zmax, (num_samples, dim))
    z[0] = 0.0
    dt = 2.0 ** -rng.integers(1, kmax + 1, num_samples)
    return z, dt


def _prepare(z_samples, dt_samples):
    z = np.asarray(z_samples, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    dt = np.broadcast_to(np.asarray(dt_samples, dtype=float), (z.shape[0],))
    return z, dt[:, None]


def check_bound(op: TamingOperator, z_samples, dt_samples) -> CheckReport:
    """Largest excess of ``|op(z, dt)|`` over ``min(C sqrt(d) dt^-alpha, |z|)``."""
    if not op.certified:
        raise ValueError("the identity operator carries no bound certificate")
    z, dt = _prepare(z_samples, dt_samples)
    d = z.shape[1]
    lhs = np.linalg.norm(apply(op, z, dt), axis=1)
    cap = op.const_C * np.sqrt(d) * dt[:, 0] ** (-op.alpha)
    rhs = np.minimum(cap, np.linalg.norm(z, axis=1))
    return CheckReport(op.kind, float(np.max(lhs - rhs)), z.shape[0])


def check_diff(op: TamingOperator, z_samples, dt_samples) -> CheckReport:
    """Largest excess of ``|op(z, dt) - z|`` over ``C dt^delta |z|^gamma``."""
    if not op.certified:
        raise ValueError("the identity operator carries no difference certificate")
    z, dt = _prepare(z_samples, dt_samples)
    lhs = np.linalg.norm(apply(op, z, dt) - z, axis=1)
    rhs = op.const_C * dt[:, 0] ** op.delta * np.linalg.norm(z, axis=1) ** op.gamma_exp
    return CheckReport(op.kind, float(np.max(lhs - rhs)), z.shape[0])


def certify(ops: Iterable[TamingOperator] = (TANH, TAME, SINE), **sample_kw) -> dict:
    z, dt = default_samples(**sample_kw)
    return {op.kind: (check_bound(op, z, dt), check_diff(op, z, dt)) for op in ops}
