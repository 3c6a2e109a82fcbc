"""Closed-loop runs: reference curves, windowed disturbances, ISE and rejection metrics."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .controller import ADDITIVE, PRODUCT, PmaGains, advance, gain_arrays, reset
from .dynamics import IntegratorConfig, VectorFieldModel, _euler, _field, as_state
from .errors import ConfigurationError, NumericFault
from .trajectory import TrajectoryLog

logger = logging.getLogger(__name__)

FAULT_PENALTY = 1e12
BASELINE_WINDOW = 0.5


class ReferenceKind(str, enum.Enum):
    EXP_APPROACH = "exp-approach"
    LINE_RAMP = "line-ramp"
    HOLD = "hold"


class DisturbanceKind(str, enum.Enum):
    NONE = "none"
    LINEAR_RECURSIVE = "linear-recursive"
    LOG_RECURSIVE = "log-recursive"


DEFAULT_SEEDS = {
    DisturbanceKind.NONE: 0.0,
    DisturbanceKind.LINEAR_RECURSIVE: 0.1,
    DisturbanceKind.LOG_RECURSIVE: 1.1,
}


@dataclass(frozen=True, eq=False)
class ReferenceSpec:
    """Reference curve from the start state to ``target``.

    ``rate`` is the time constant for the exponential approach and the ramp
    duration for the line ramp; the hold reference ignores it.
    """

    kind: ReferenceKind
    target: np.ndarray
    rate: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", ReferenceKind(self.kind))
        target = as_state(self.target, "target")
        if not np.all(np.isfinite(target)):
            raise ConfigurationError("reference target must be finite", key="target")
        object.__setattr__(self, "target", target)
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ConfigurationError(f"reference rate must be positive, got {self.rate}", key="rate")

    def describe(self) -> str:
        return f"{self.kind.value} target={list(map(float, self.target))} rate={self.rate!r}"


def reference_at(spec: ReferenceSpec, t: float, xi0) -> np.ndarray:
    xi0 = np.asarray(xi0, dtype=float)
    if spec.kind is ReferenceKind.HOLD:
        return spec.target.copy()
    if spec.kind is ReferenceKind.EXP_APPROACH:
        # xi0 + (target - xi0) * (1 - exp(-t/rate)), exact at t = 0
        return xi0 + (spec.target - xi0) * -math.expm1(-t / spec.rate)
    frac = min(t / spec.rate, 1.0)
    return xi0 + (spec.target - xi0) * frac


@dataclass(frozen=True)
class DisturbanceProfile:
    """Scalar recursive disturbance injected for ``t_alpha < t_k < t_beta``.

    ``seed`` is the value the recursion starts from; ``None`` picks 0.1 for the
    linear recursion and 1.1 for the logarithmic one. ``components`` restricts
    injection to a subset of state coordinates (all of them by default).
    """

    kind: DisturbanceKind = DisturbanceKind.NONE
    t_alpha: float = 1.74
    t_beta: float = 1.81
    seed: float | None = None
    increment: float = 0.1
    components: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DisturbanceKind(self.kind))
        if self.seed is None:
            object.__setattr__(self, "seed", DEFAULT_SEEDS[self.kind])
        for name in ("t_alpha", "t_beta", "seed", "increment"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite", key=name)
        if not self.t_alpha < self.t_beta:
            raise ConfigurationError(
                f"disturbance window needs t_alpha < t_beta, got [{self.t_alpha}, {self.t_beta}]",
                key="t_alpha",
            )
        if self.components is not None:
            object.__setattr__(self, "components", tuple(int(c) for c in self.components))

    def in_window(self, t: float) -> bool:
        return self.t_alpha < t < self.t_beta

    def validate(self, t_final: float, dim: int) -> None:
        if self.kind is DisturbanceKind.NONE:
            return
        if self.t_beta > t_final:
            raise ConfigurationError(
                f"disturbance window [{self.t_alpha}, {self.t_beta}] ends after t_final={t_final}",
                key="t_beta",
            )
        if self.components is not None and any(not 0 <= c < dim for c in self.components):
            raise ConfigurationError(f"disturbance components must lie in [0, {dim})", key="components")

    def mask(self, dim: int) -> np.ndarray:
        if self.components is None:
            return np.ones(dim)
        m = np.zeros(dim)
        m[list(self.components)] = 1.0
        return m

    def describe(self) -> str:
        return (
            f"{self.kind.value} window=({self.t_alpha!r}, {self.t_beta!r}) "
            f"seed={self.seed!r} increment={self.increment!r}"
        )


NO_DISTURBANCE = DisturbanceProfile()


def _emit(profile: DisturbanceProfile, t_k: float, prev: float | None) -> tuple[float, bool]:
    if profile.kind is DisturbanceKind.NONE or not profile.in_window(t_k):
        return 0.0, False
    if prev is None:
        prev = profile.seed
    if profile.kind is DisturbanceKind.LINEAR_RECURSIVE:
        return profile.increment + prev, False
    if prev <= 0:
        return 0.0, True
    return math.log(prev), False


def disturbance_step(profile: DisturbanceProfile, t_k: float, prev: float | None = None) -> float:
    """Disturbance emitted at time ``t_k`` given the previous in-window emission.

    Pass ``prev=None`` on the first in-window step so the recursion starts from
    the profile seed. Outside the open window the result is exactly 0. The log
    recursion cannot take a non-positive argument; it then emits 0 and warns.
    """
    value, guarded = _emit(profile, t_k, prev)
    if guarded:
        logger.warning("log disturbance guard engaged at t=%r (previous value %r)", t_k, prev)
    return value


def run_closed_loop(
    model: VectorFieldModel,
    gains: PmaGains,
    reference: ReferenceSpec,
    disturbance: DisturbanceProfile,
    cfg: IntegratorConfig,
    xi0,
    *,
    controller_enabled: bool = True,
    composition: str = PRODUCT,
) -> TrajectoryLog:
    """Simulate the controlled, optionally disturbed motion for ``K`` steps.

    Each step reads the previous state and reference, computes the PMA output,
    then the disturbance, then integrates ``f(xi) + u + u_dist``. With
    ``controller_enabled=False`` the control is pinned to zero. On a numeric
    fault the raised :class:`NumericFault` carries the rows logged so far.
    """
    xi0 = as_state(xi0, "xi0")
    d = model.dim
    if xi0.size != d or reference.target.size != d:
        raise ConfigurationError(
            f"dimension mismatch: model {d}, xi0 {xi0.size}, reference {reference.target.size}"
        )
    disturbance.validate(cfg.t_final, d)
    if composition not in (PRODUCT, ADDITIVE):
        raise ConfigurationError(f"unknown composition {composition!r}", key="composition")
    gains_d = gain_arrays(gains, d)
    K, h = cfg.steps, cfg.h
    mask = disturbance.mask(d)

    t = np.arange(K + 1) * h
    ref = np.array([reference_at(reference, tk, xi0) for tk in t])
    xi = np.empty((K + 1, d))
    u = np.zeros((K + 1, d))
    udist = np.zeros(K + 1)
    xi[0] = xi0

    state = reset(gains, dim=d)
    prev_dist = None
    guard_steps = []
    rows = K + 1
    fault = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, K + 1):
            try:
                if controller_enabled:
                    u[k], state = advance(state, gains_d, xi[k - 1], ref[k - 1], h, composition)
                w, guarded = _emit(disturbance, t[k], prev_dist)
                if disturbance.in_window(t[k]):
                    prev_dist = w
                if guarded:
                    guard_steps.append(k)
                    logger.warning("log disturbance guard engaged at step %d (t=%r)", k, float(t[k]))
                udist[k] = w
                xi[k] = _euler(xi[k - 1], _field(model, xi[k - 1]) + u[k] + w * mask, cfg, k)
            except NumericFault as exc:
                if exc.step is None:
                    exc.step = k
                fault, rows = exc, k
                break

    metadata = {
        "run": "closed-loop" if controller_enabled else "open-loop",
        "model": model.describe(),
        "gains": gains.describe() if isinstance(gains, PmaGains) else "; ".join(g.describe() for g in gains),
        "composition": composition,
        "reference": reference.describe(),
        "disturbance": disturbance.describe(),
        "xi0": list(map(float, xi0)),
        "h": repr(h),
        "mu": repr(cfg.mu),
        "t_final": repr(cfg.t_final),
    }
    if guard_steps:
        metadata["log_guard_steps"] = guard_steps
    if fault is not None:
        metadata["fault_step"] = fault.step
    log = TrajectoryLog(
        t=t[:rows],
        xi=xi[:rows],
        xi_ref=ref[:rows],
        u=u[:rows],
        u_dist=np.outer(udist[:rows], mask),
        udist=udist[:rows],
        eps=ref[:rows] - xi[:rows],
        metadata=metadata,
    )
    if fault is not None:
        fault.log = log
        raise fault
    return log


def ise(log: TrajectoryLog) -> float:
    """Left Riemann sum ``h * sum_{k<K} |xi_k - ref_k|^2``."""
    if log.rows < 2:
        return 0.0
    h = float(log.t[1] - log.t[0])
    sq = np.einsum("ij,ij->i", log.eps[:-1], log.eps[:-1])
    return float(h * math.fsum(sq))


@dataclass(frozen=True)
class RejectionMetrics:
    peak_error: float
    recovery_time: float
    band: float
    t_beta: float

    @property
    def recovery_delay(self) -> float:
        return self.recovery_time - self.t_beta


def rejection_metrics(log: TrajectoryLog, profile: DisturbanceProfile) -> RejectionMetrics:
    """Peak tracking error from ``t_alpha`` on and the time the error settles.

    The settling band is the largest error norm over the half second before
    the window. ``recovery_time`` is the first time after ``t_beta`` from which
    the error stays inside the band until the end of the log; it equals
    ``t_beta`` when the error never leaves the band and ``inf`` when it never
    settles.
    """
    t = log.t
    if not (t[0] <= profile.t_alpha and profile.t_beta <= t[-1] and profile.t_alpha < profile.t_beta):
        raise ConfigurationError(
            f"disturbance window [{profile.t_alpha}, {profile.t_beta}] outside log range [{t[0]}, {t[-1]}]"
        )
    norms = np.linalg.norm(log.eps, axis=1)
    pre = (t >= profile.t_alpha - BASELINE_WINDOW) & (t <= profile.t_alpha)
    if not pre.any():
        raise ConfigurationError("no samples before the disturbance window")
    band = float(norms[pre].max())
    peak = float(norms[t > profile.t_alpha].max())

    post = np.flatnonzero(t > profile.t_beta)
    outside = post[norms[post] > band * (1 + 1e-12)]
    if outside.size == 0:
        recovery = profile.t_beta
    elif outside[-1] == log.rows - 1:
        recovery = math.inf
    else:
        recovery = float(t[outside[-1] + 1])
    return RejectionMetrics(peak, recovery, band, profile.t_beta)


@dataclass(frozen=True, eq=False)
class ClosedLoopScenario:
    """Everything but the gains needed for a closed-loop run."""

    model: VectorFieldModel
    reference: ReferenceSpec
    cfg: IntegratorConfig
    xi0: np.ndarray
    disturbance: DisturbanceProfile = field(default=NO_DISTURBANCE)
    composition: str = PRODUCT

    def run(self, gains: PmaGains) -> TrajectoryLog:
        return run_closed_loop(
            self.model, gains, self.reference, self.disturbance, self.cfg, self.xi0,
            composition=self.composition,
        )

    def objective(self, gains: PmaGains) -> float:
        try:
            return ise(self.run(gains))
        except NumericFault:
            return FAULT_PENALTY


DEFAULT_ATTRACTOR = (1.0, 0.5)
DEFAULT_BIAS = (-0.3, 0.2)
DEFAULT_GAINS = PmaGains(kp=0.1, ki=0.1, k_alpha=1.0, k_beta=0.1)


def default_model() -> VectorFieldModel:
    return VectorFieldModel("biased-linear-sink", np.array(DEFAULT_ATTRACTOR), rate=1.0, bias=np.array(DEFAULT_BIAS))


def default_scenario(disturbance: DisturbanceProfile = NO_DISTURBANCE) -> ClosedLoopScenario:
    """2-D biased sink starting at the origin and tracking an exponential approach to the attractor."""
    model = default_model()
    return ClosedLoopScenario(
        model=model,
        reference=ReferenceSpec("exp-approach", model.attractor.copy(), rate=1.0),
        cfg=IntegratorConfig(),
        xi0=np.zeros(model.dim),
        disturbance=disturbance,
    )
