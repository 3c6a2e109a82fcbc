"""Analytic stand-in vector fields and the damped forward Euler integrator.

The robot motion is an autonomous system ``xi_dot = f(xi) + u``. ``f`` would
normally be regressed from demonstrations; here it is one of three closed-form
fields so every experiment is self-contained.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericFault
from .trajectory import TrajectoryLog

# floor(t_final / h) with a guard against quotients like 0.3 / 0.1 = 2.9999999999999996
_STEP_EPS = 1e-9


class ModelKind(str, enum.Enum):
    LINEAR_SINK = "linear-sink"
    BIASED_LINEAR_SINK = "biased-linear-sink"
    NONLINEAR_SWIRL = "nonlinear-swirl"


def as_state(values, name: str = "state") -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size < 1:
        raise ConfigurationError(f"{name} must have at least one component")
    return arr


@dataclass(frozen=True, eq=False)
class VectorFieldModel:
    """Closed-form field ``f(xi)`` pulling the state towards ``attractor``.

    ``rate`` is either a positive scalar or a ``d x d`` gain matrix. ``bias``
    only matters for the biased sink, ``swirl`` only for the swirl field.
    """

    kind: ModelKind
    attractor: np.ndarray
    rate: float | np.ndarray = 1.0
    bias: np.ndarray | None = None
    swirl: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        a = as_state(self.attractor, "attractor")
        if not np.all(np.isfinite(a)):
            raise ConfigurationError("attractor must be finite")
        object.__setattr__(self, "attractor", a)
        d = a.size

        rate = np.array(self.rate, dtype=float)
        if rate.ndim == 0:
            if not (rate > 0 and math.isfinite(rate)):
                raise ConfigurationError(f"rate must be a finite positive scalar, got {self.rate}")
            object.__setattr__(self, "rate", float(rate))
        elif rate.shape == (d, d) and np.all(np.isfinite(rate)):
            object.__setattr__(self, "rate", rate)
        else:
            raise ConfigurationError(f"rate must be a scalar or a {d}x{d} matrix")

        if self.kind is ModelKind.BIASED_LINEAR_SINK:
            bias = np.zeros(d) if self.bias is None else as_state(self.bias, "bias")
            if bias.size != d or not np.all(np.isfinite(bias)):
                raise ConfigurationError(f"bias must be a finite vector of length {d}")
            object.__setattr__(self, "bias", bias)
        if self.kind is ModelKind.NONLINEAR_SWIRL:
            if d < 2:
                raise ConfigurationError("swirl field needs at least two dimensions")
            if not math.isfinite(self.swirl):
                raise ConfigurationError("swirl must be finite")
            object.__setattr__(self, "swirl", float(self.swirl))

    @property
    def dim(self) -> int:
        return self.attractor.size

    def describe(self) -> str:
        parts = [self.kind.value, f"attractor={list(map(float, self.attractor))}"]
        rate = self.rate if np.ndim(self.rate) == 0 else np.asarray(self.rate).tolist()
        parts.append(f"rate={rate}")
        if self.kind is ModelKind.BIASED_LINEAR_SINK:
            parts.append(f"bias={list(map(float, self.bias))}")
        if self.kind is ModelKind.NONLINEAR_SWIRL:
            parts.append(f"swirl={self.swirl}")
        return " ".join(parts)


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 0.01
    mu: float = 0.99
    t_final: float = 4.0

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ConfigurationError(f"step size h must be positive, got {self.h}", key="h")
        if not (math.isfinite(self.t_final) and self.t_final > 0):
            raise ConfigurationError(f"t_final must be positive, got {self.t_final}", key="t_final")
        if self.h > self.t_final:
            raise ConfigurationError("step size h exceeds t_final", key="h")
        if not 0.0 <= self.mu <= 1.0:
            raise ConfigurationError(f"mu must lie in [0, 1], got {self.mu}", key="mu")

    @property
    def steps(self) -> int:
        return max(1, math.floor(self.t_final / self.h + _STEP_EPS))

    def time(self, k: int) -> float:
        return k * self.h


def rotate_quarter(v: np.ndarray) -> np.ndarray:
    """Clockwise quarter turn in the first two coordinates, identity elsewhere."""
    out = v.copy()
    out[0], out[1] = v[1], -v[0]
    return out


def _field(model: VectorFieldModel, xi: np.ndarray) -> np.ndarray:
    diff = model.attractor - xi
    if isinstance(model.rate, float):
        out = model.rate * diff
    else:
        out = model.rate @ diff
    if model.kind is ModelKind.BIASED_LINEAR_SINK:
        out = out + model.bias
    elif model.kind is ModelKind.NONLINEAR_SWIRL:
        out = out + model.swirl * rotate_quarter(-diff)
    return out


def eval_field(model: VectorFieldModel, xi) -> np.ndarray:
    xi = as_state(xi)
    if xi.size != model.dim:
        raise ConfigurationError(f"state has dimension {xi.size}, model expects {model.dim}")
    if not np.all(np.isfinite(xi)):
        raise NumericFault("non-finite state passed to the vector field")
    return _field(model, xi)


def euler_step(xi_k, xi_dot, cfg: IntegratorConfig, step: int | None = None) -> np.ndarray:
    """Damped forward Euler update ``mu * xi_k + h * xi_dot``.

    ``mu = 1`` is the plain forward Euler scheme.
    """
    xi_k = np.asarray(xi_k, dtype=float)
    xi_dot = np.asarray(xi_dot, dtype=float)
    if xi_k.shape != xi_dot.shape:
        raise ConfigurationError(f"shape mismatch {xi_k.shape} vs {xi_dot.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        return _euler(xi_k, xi_dot, cfg, step)


def _euler(xi_k: np.ndarray, xi_dot: np.ndarray, cfg: IntegratorConfig, step: int | None) -> np.ndarray:
    out = cfg.mu * xi_k + cfg.h * xi_dot
    if not math.isfinite(out.sum()) and not np.all(np.isfinite(out)):
        raise NumericFault("integrator produced a non-finite state", step=step)
    return out


def run_open_loop(model: VectorFieldModel, xi0, cfg: IntegratorConfig, target=None) -> TrajectoryLog:
    """Integrate the uncontrolled field (``u = 0``) from ``xi0``.

    The reference column holds ``target`` (the attractor by default) so the
    error column shows how far the free motion ends from the expected point.
    """
    xi0 = as_state(xi0, "xi0")
    if xi0.size != model.dim:
        raise ConfigurationError(f"xi0 has dimension {xi0.size}, model expects {model.dim}")
    target = model.attractor if target is None else as_state(target, "target")
    K, d = cfg.steps, model.dim

    xi = np.empty((K + 1, d))
    xi[0] = xi0
    rows = K + 1
    fault = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, K + 1):
            try:
                xi[k] = _euler(xi[k - 1], _field(model, xi[k - 1]), cfg, k)
            except NumericFault as exc:
                fault, rows = exc, k
                break

    t = np.arange(rows) * cfg.h
    ref = np.tile(target, (rows, 1))
    zeros = np.zeros((rows, d))
    log = TrajectoryLog(
        t=t,
        xi=xi[:rows],
        xi_ref=ref,
        u=zeros,
        u_dist=zeros.copy(),
        udist=np.zeros(rows),
        eps=ref - xi[:rows],
        metadata={
            "run": "open-loop",
            "model": model.describe(),
            "h": repr(cfg.h),
            "mu": repr(cfg.mu),
            "t_final": repr(cfg.t_final),
        },
    )
    if fault is not None:
        fault.log = log
        raise fault
    return log


def open_loop_fixed_point(model: VectorFieldModel, cfg: IntegratorConfig) -> np.ndarray:
    """Fixed point of ``xi <- mu*xi + h*rate*(a - xi)`` for a scalar-rate linear sink."""
    if model.kind is not ModelKind.LINEAR_SINK or np.ndim(model.rate) != 0:
        raise ConfigurationError("closed-form fixed point only for scalar-rate linear sinks")
    hl = cfg.h * model.rate
    return model.attractor * hl / (1.0 - cfg.mu + hl)
