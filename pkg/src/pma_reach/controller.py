"""Discrete para-model controller (PMA).

At step ``k`` (starting at 1) with measurement ``y_{k-1}`` and reference
``y*_{k-1}``::

    eps      = y*_{k-1} - y_{k-1}
    ui_k     = ui_{k-1} + kp * (k_alpha * exp(-k_beta * k) - y_{k-1})
    u_k      = I_{k-1} * ui_k
    I_k      = I_{k-1} + ki * eps * dt          (left Riemann sum)

``I`` is the error integral evaluated before the current error is added, so
the very first output after a reset is always zero. Nothing here needs a
derivative of the output or a plant model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, NumericFault

PRODUCT = "product"
ADDITIVE = "additive"


@dataclass(frozen=True)
class PmaGains:
    kp: float
    ki: float
    k_alpha: float = 0.0
    k_beta: float = 0.0

    def __post_init__(self):
        for name in ("kp", "ki", "k_alpha", "k_beta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ConfigurationError(f"gain {name} must be finite, got {value}", key=name)
        if self.kp <= 0:
            raise ConfigurationError(f"kp must be positive, got {self.kp}", key="kp")
        if self.ki <= 0:
            raise ConfigurationError(f"ki must be positive, got {self.ki}", key="ki")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.kp, self.ki, self.k_alpha, self.k_beta)

    def describe(self) -> str:
        return f"kp={self.kp!r} ki={self.ki!r} k_alpha={self.k_alpha!r} k_beta={self.k_beta!r}"


@dataclass(frozen=True, eq=False)
class PmaState:
    """Controller memory. Scalars for :func:`pma_step`, arrays for the vector form."""

    integral_acc: float | np.ndarray = 0.0
    u_internal: float | np.ndarray = 0.0
    step_index: int = 1

    def __eq__(self, other):
        if not isinstance(other, PmaState):
            return NotImplemented
        return (
            self.step_index == other.step_index
            and np.array_equal(self.integral_acc, other.integral_acc)
            and np.array_equal(self.u_internal, other.u_internal)
        )


def reset(gains: PmaGains | None = None, dim: int | None = None) -> PmaState:
    if dim is None:
        return PmaState(0.0, 0.0, 1)
    return PmaState(np.zeros(dim), np.zeros(dim), 1)


def init_function(gains: PmaGains, k: int) -> float:
    """Decaying bootstrap term ``k_alpha * exp(-k_beta * k)``."""
    if k < 1:
        raise ConfigurationError(f"step index starts at 1, got {k}")
    return gains.k_alpha * _exp(-gains.k_beta * k)


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def pma_step(
    state: PmaState,
    gains: PmaGains,
    y_prev: float,
    y_ref_prev: float,
    dt: float,
    composition: str = PRODUCT,
) -> tuple[float, PmaState]:
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    k = state.step_index
    eps = y_ref_prev - y_prev
    ui = state.u_internal + gains.kp * (init_function(gains, k) - y_prev)
    if composition == PRODUCT:
        u = state.integral_acc * ui
    elif composition == ADDITIVE:
        u = state.integral_acc + ui
    else:
        raise ConfigurationError(f"unknown composition {composition!r}")
    acc = state.integral_acc + gains.ki * eps * dt
    if not (math.isfinite(u) and math.isfinite(ui) and math.isfinite(acc)):
        raise NumericFault("controller output is not finite", step=k)
    return u, PmaState(acc, ui, k + 1)


def gain_arrays(gains: PmaGains | Sequence[PmaGains], d: int):
    if isinstance(gains, PmaGains):
        return gains.kp, gains.ki, gains.k_alpha, gains.k_beta
    if len(gains) != d:
        raise ConfigurationError(f"expected {d} per-channel gain sets, got {len(gains)}")
    return tuple(np.array(col, dtype=float) for col in zip(*(g.as_tuple() for g in gains)))


def pma_step_vector(
    state: PmaState,
    gains: PmaGains | Sequence[PmaGains],
    xi_prev: np.ndarray,
    xi_ref_prev: np.ndarray,
    dt: float,
    composition: str = PRODUCT,
) -> tuple[np.ndarray, PmaState]:
    """Channel-wise :func:`pma_step` on a d-vector.

    Channel ``i`` only sees ``xi_prev[i]`` and ``xi_ref_prev[i]``. ``gains`` is
    either shared by all channels or a sequence with one entry per channel.
    The arithmetic is elementwise, so each channel matches the scalar step
    bit for bit.
    """
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if composition not in (PRODUCT, ADDITIVE):
        raise ConfigurationError(f"unknown composition {composition!r}")
    xi_prev = np.asarray(xi_prev, dtype=float)
    xi_ref_prev = np.asarray(xi_ref_prev, dtype=float)
    d = xi_prev.size
    if xi_ref_prev.shape != xi_prev.shape or np.shape(state.integral_acc) != (d,):
        raise ConfigurationError("controller state, measurement and reference dimensions differ")
    with np.errstate(over="ignore", invalid="ignore"):
        return advance(state, gain_arrays(gains, d), xi_prev, xi_ref_prev, dt, composition)


def advance(state, gain_arrays, xi_prev, xi_ref_prev, dt, composition=PRODUCT):
    """Unchecked vector step used inside simulation loops.

    ``gain_arrays`` is the ``(kp, ki, k_alpha, k_beta)`` tuple of scalars or
    per-channel arrays. The caller owns input validation and the numpy error
    state.
    """
    kp, ki, k_alpha, k_beta = gain_arrays
    k = state.step_index
    if np.ndim(k_beta) == 0:
        init = k_alpha * _exp(-k_beta * k)
    else:
        init = k_alpha * np.array([_exp(-b * k) for b in k_beta])

    eps = xi_ref_prev - xi_prev
    ui = state.u_internal + kp * (init - xi_prev)
    if composition == PRODUCT:
        u = state.integral_acc * ui
    else:
        u = state.integral_acc + ui
    acc = state.integral_acc + ki * eps * dt

    # a non-finite sum is the cheap hint; the elementwise scan names the channel
    if not math.isfinite(u.sum() + ui.sum() + acc.sum()):
        bad = ~(np.isfinite(u) & np.isfinite(ui) & np.isfinite(acc))
        if bad.any():
            raise NumericFault("controller output is not finite", step=k, channel=int(np.argmax(bad)))
    return u, PmaState(acc, ui, k + 1)
