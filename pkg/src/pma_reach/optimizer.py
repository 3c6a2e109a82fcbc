"""Coordinate pattern search for tuning the PMA gains on closed-loop ISE.

The search polls ``x +/- mesh_i * e_i`` around the incumbent in a fixed order
(parameter order, ``+`` before ``-``), moves to the first strictly better
point, and halves every mesh when a full poll fails. Parameters flagged
``log_scale`` are searched in log10 units, which suits gains spanning several
decades.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .controller import PmaGains
from .errors import ConfigurationError
from .simulation import FAULT_PENALTY, ClosedLoopScenario
from .trajectory import fmt

GAIN_NAMES = ("kp", "ki", "k_alpha", "k_beta")


class Termination(str, enum.Enum):
    MESH_TOLERANCE = "mesh-tolerance"
    BUDGET = "budget"


@dataclass(frozen=True)
class Parameter:
    name: str
    lower: float
    upper: float
    initial: float
    mesh: float
    log_scale: bool = False

    def to_search(self, x: float) -> float:
        return math.log10(x) if self.log_scale else x

    def from_search(self, z: float) -> float:
        return 10.0**z if self.log_scale else z

    @property
    def search_bounds(self) -> tuple[float, float]:
        return self.to_search(self.lower), self.to_search(self.upper)


@dataclass(frozen=True)
class SearchSpace:
    parameters: tuple[Parameter, ...]

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        if not self.parameters:
            raise ConfigurationError("search space has no parameters")
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate parameter names in {names}")
        for p in self.parameters:
            values = (p.lower, p.upper, p.initial, p.mesh)
            if not all(math.isfinite(v) for v in values):
                raise ConfigurationError(f"{p.name}: bounds, initial value and mesh must be finite", key=p.name)
            if not p.lower < p.upper:
                raise ConfigurationError(f"{p.name}: lower bound must be below upper bound", key=p.name)
            if not p.lower <= p.initial <= p.upper:
                raise ConfigurationError(f"{p.name}: initial value {p.initial} outside bounds", key=p.name)
            if p.log_scale and p.lower <= 0:
                raise ConfigurationError(f"{p.name}: log-scaled parameter needs a positive lower bound", key=p.name)
            if p.name in ("kp", "ki") and p.lower <= 0:
                raise ConfigurationError(f"{p.name}: lower bound must be positive", key=p.name)
            lo, hi = p.search_bounds
            if not 0 < p.mesh <= hi - lo:
                raise ConfigurationError(f"{p.name}: initial mesh must lie in (0, {hi - lo}]", key=p.name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameters)

    def point(self, z: np.ndarray) -> dict[str, float]:
        return {p.name: p.from_search(float(v)) for p, v in zip(self.parameters, z)}


def default_search_space(initial: PmaGains) -> SearchSpace:
    """Default box: kp, ki in [1e-3, 1e2] (log mesh), k_alpha in [-10, 10], k_beta in [0, 1]."""
    return SearchSpace(
        (
            Parameter("kp", 1e-3, 1e2, initial.kp, mesh=1.0, log_scale=True),
            Parameter("ki", 1e-3, 1e2, initial.ki, mesh=1.0, log_scale=True),
            Parameter("k_alpha", -10.0, 10.0, initial.k_alpha, mesh=2.0),
            Parameter("k_beta", 0.0, 1.0, initial.k_beta, mesh=0.25),
        )
    )


@dataclass
class OptimizerReport:
    names: tuple[str, ...]
    best_params: dict[str, float]
    best_ise: float
    evaluations: int
    history: list[tuple[int, dict[str, float], float]] = field(default_factory=list)
    termination: Termination = Termination.BUDGET

    @property
    def best_gains(self) -> PmaGains:
        return PmaGains(**{name: self.best_params[name] for name in GAIN_NAMES})

    def best_so_far(self) -> list[float]:
        return list(np.minimum.accumulate([v for _, _, v in self.history]))

    def history_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["evaluation", *self.names, "objective"])
        for index, params, value in self.history:
            writer.writerow([index, *(fmt(params[n]) for n in self.names), fmt(value)])
        return buf.getvalue()

    def summary(self) -> str:
        params = " ".join(f"{n}={fmt(self.best_params[n])}" for n in self.names)
        return (
            f"best_ise={fmt(self.best_ise)} evaluations={self.evaluations} "
            f"termination={self.termination.value} {params}"
        )


def evaluate_objective(params: PmaGains | Mapping[str, float], scenario: ClosedLoopScenario) -> float:
    """Closed-loop ISE for the given gains; a faulted run scores ``FAULT_PENALTY``."""
    gains = params if isinstance(params, PmaGains) else PmaGains(**{n: params[n] for n in GAIN_NAMES})
    value = scenario.objective(gains)
    return value if math.isfinite(value) else FAULT_PENALTY


def direct_search(
    space: SearchSpace,
    objective: ClosedLoopScenario | Callable[[dict[str, float]], float],
    budget: int = 2000,
    mesh_tol: float = 1e-3,
) -> OptimizerReport:
    """Minimize ``objective`` over the box by coordinate pattern search.

    ``objective`` is either a closed-loop scenario (scored by ISE over the four
    gains) or any callable taking a ``{name: value}`` dict. The search stops
    when every mesh drops below ``mesh_tol`` (in search units) or after
    ``budget`` evaluations.
    """
    if budget < 1:
        raise ConfigurationError(f"budget must be at least 1, got {budget}", key="budget")
    if not (math.isfinite(mesh_tol) and mesh_tol > 0):
        raise ConfigurationError(f"mesh_tol must be positive, got {mesh_tol}", key="mesh_tol")
    if isinstance(objective, ClosedLoopScenario):
        if set(space.names) != set(GAIN_NAMES):
            raise ConfigurationError(f"gain search space must cover exactly {GAIN_NAMES}")
        scenario = objective
        objective = lambda params: evaluate_objective(params, scenario)  # noqa: E731

    params = space.parameters
    lo = np.array([p.search_bounds[0] for p in params])
    hi = np.array([p.search_bounds[1] for p in params])
    mesh = np.array([p.mesh for p in params], dtype=float)
    z = np.clip([p.to_search(p.initial) for p in params], lo, hi)

    history: list[tuple[int, dict[str, float], float]] = []

    def evaluate(zc: np.ndarray) -> float:
        point = space.point(zc)
        value = float(objective(point))
        history.append((len(history), point, value))
        return value

    f = evaluate(z)
    termination = Termination.BUDGET
    while len(history) < budget:
        if np.all(mesh < mesh_tol):
            termination = Termination.MESH_TOLERANCE
            break
        improved = False
        for i in range(len(params)):
            for sign in (1.0, -1.0):
                cand = z.copy()
                cand[i] = min(max(z[i] + sign * mesh[i], lo[i]), hi[i])
                if cand[i] == z[i]:
                    continue
                if len(history) >= budget:
                    break
                fc = evaluate(cand)
                if fc < f:
                    z, f, improved = cand, fc, True
                    break
            if improved or len(history) >= budget:
                break
        if not improved and len(history) < budget:
            mesh = mesh / 2.0
    else:
        if np.all(mesh < mesh_tol):
            termination = Termination.MESH_TOLERANCE

    best = min(history, key=lambda row: row[2])
    return OptimizerReport(
        names=space.names,
        best_params=dict(best[1]),
        best_ise=best[2],
        evaluations=len(history),
        history=history,
        termination=termination,
    )
