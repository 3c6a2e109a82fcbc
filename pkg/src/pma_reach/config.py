"""Run configuration: a sectioned TOML file parsed into a validated RunConfig.

Example::

    mode = "disturb"
    output = "runs/case1"

    [model]
    kind = "biased-linear-sink"
    attractor = [1.0, 0.5]
    bias = [-0.3, 0.2]

    [gains]
    kp = 0.1
    ki = 0.1
    k_alpha = 1.0
    k_beta = 0.1

    [disturbance]
    kind = "linear-recursive"
    t_alpha = 1.74
    t_beta = 1.81
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

import numpy as np
import tomli

from .controller import ADDITIVE, PRODUCT, PmaGains
from .dynamics import IntegratorConfig, ModelKind, VectorFieldModel
from .errors import ConfigurationError
from .optimizer import GAIN_NAMES, Parameter, SearchSpace, default_search_space
from .simulation import (
    DEFAULT_ATTRACTOR,
    DEFAULT_BIAS,
    DEFAULT_GAINS,
    ClosedLoopScenario,
    DisturbanceKind,
    DisturbanceProfile,
    ReferenceKind,
    ReferenceSpec,
)


class Mode(str, enum.Enum):
    OPEN_LOOP = "open-loop"
    CLOSED_LOOP = "closed-loop"
    DISTURB = "disturb"
    OPTIMIZE = "optimize"


@dataclass(frozen=True, eq=False)
class OptimizerSettings:
    space: SearchSpace
    budget: int = 2000
    mesh_tol: float = 1e-3


@dataclass(frozen=True, eq=False)
class RunConfig:
    mode: Mode
    model: VectorFieldModel
    gains: PmaGains | tuple[PmaGains, ...]
    reference: ReferenceSpec
    disturbance: DisturbanceProfile
    integrator: IntegratorConfig
    xi0: np.ndarray
    output: str = "pma"
    composition: str = PRODUCT
    optimizer: OptimizerSettings | None = None

    def scenario(self, with_disturbance: bool = False) -> ClosedLoopScenario:
        kwargs = {"disturbance": self.disturbance} if with_disturbance else {}
        return ClosedLoopScenario(
            self.model, self.reference, self.integrator, self.xi0, composition=self.composition, **kwargs
        )


NUMBER = "number"
VECTOR = "vector"
TEXT = "text"
INTEGER = "integer"
FLAG = "flag"
BOUNDS = "bounds"

SCHEMA = {
    None: {"mode": TEXT, "output": TEXT},
    "model": {"kind": TEXT, "attractor": VECTOR, "rate": (NUMBER, "matrix"), "bias": VECTOR, "swirl": NUMBER,
              "initial_state": VECTOR},
    "gains": {"kp": (NUMBER, VECTOR), "ki": (NUMBER, VECTOR), "k_alpha": (NUMBER, VECTOR),
              "k_beta": (NUMBER, VECTOR), "composition": TEXT},
    "integrator": {"h": NUMBER, "mu": NUMBER, "t_final": NUMBER},
    "reference": {"kind": TEXT, "target": VECTOR, "rate": NUMBER},
    "disturbance": {"kind": TEXT, "t_alpha": NUMBER, "t_beta": NUMBER, "seed": NUMBER, "increment": NUMBER,
                    "components": "indices"},
    "optimizer": {"budget": INTEGER, "mesh_tol": NUMBER, **{name: BOUNDS for name in GAIN_NAMES}},
}
BOUND_KEYS = {"lower": NUMBER, "upper": NUMBER, "initial": NUMBER, "mesh": NUMBER, "log": FLAG}


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _matches(value, kind) -> bool:
    if isinstance(kind, tuple):
        return any(_matches(value, k) for k in kind)
    if kind == NUMBER:
        return _is_number(value)
    if kind == INTEGER:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == TEXT:
        return isinstance(value, str)
    if kind == FLAG:
        return isinstance(value, bool)
    if kind == VECTOR:
        return isinstance(value, list) and len(value) > 0 and all(_is_number(v) for v in value)
    if kind == "indices":
        return isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    if kind == "matrix":
        return isinstance(value, list) and len(value) > 0 and all(_matches(row, VECTOR) for row in value)
    if kind == BOUNDS:
        return isinstance(value, dict)
    raise AssertionError(kind)


def _describe(kind) -> str:
    if isinstance(kind, tuple):
        return " or ".join(_describe(k) for k in kind)
    return {VECTOR: "list of numbers", "indices": "list of integers", BOUNDS: "table"}.get(kind, kind)


class _Locator:
    """Maps (section, key) pairs back to line numbers of the source text."""

    _section = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")
    _key = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")

    def __init__(self, text: str):
        self.lines: dict[tuple[str | None, str], int] = {}
        self.sections: dict[str, int] = {}
        section = None
        for number, line in enumerate(text.splitlines(), start=1):
            m = self._section.match(line)
            if m:
                section = m.group(1)
                self.sections.setdefault(section, number)
                continue
            m = self._key.match(line)
            if m:
                self.lines.setdefault((section, m.group(1)), number)

    def line(self, section: str | None, key: str | None = None) -> int | None:
        if key is None:
            return self.sections.get(section)
        return self.lines.get((section, key), self.sections.get(section))

    def error(self, message: str, section: str | None, key: str | None = None) -> ConfigurationError:
        name = key if section is None else (section if key is None else f"{section}.{key}")
        return ConfigurationError(message, key=name, line=self.line(section, key))


def _check_schema(data: dict, where: _Locator) -> None:
    for name, value in data.items():
        if isinstance(value, dict) and name in SCHEMA and name is not None:
            allowed = SCHEMA[name]
            for key, item in value.items():
                if key not in allowed:
                    raise where.error(f"unknown key '{key}' in [{name}]", name, key)
                if not _matches(item, allowed[key]):
                    raise where.error(f"expected {_describe(allowed[key])}, got {item!r}", name, key)
                if allowed[key] == BOUNDS:
                    for bk, bv in item.items():
                        if bk not in BOUND_KEYS:
                            raise where.error(f"unknown bound key '{bk}'", name, key)
                        if not _matches(bv, BOUND_KEYS[bk]):
                            raise where.error(f"'{bk}' must be a {BOUND_KEYS[bk]}", name, key)
        elif name in SCHEMA[None]:
            if not _matches(value, SCHEMA[None][name]):
                raise where.error(f"expected {_describe(SCHEMA[None][name])}, got {value!r}", None, name)
        elif isinstance(value, dict):
            raise where.error(f"unknown section [{name}]", name)
        else:
            raise where.error(f"unknown key '{name}'", None, name)


def _enum(cls, value: str, where: _Locator, section: str | None, key: str):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise where.error(f"'{value}' is not one of: {choices}", section, key) from None


def _build(section: str, key_hint: str, where: _Locator, factory, *args, **kwargs):
    """Call a validating constructor and re-raise its errors with a file position."""
    try:
        return factory(*args, **kwargs)
    except ConfigurationError as exc:
        key = exc.key or key_hint
        raise where.error(exc.reason, section, key) from None


def _gains(raw: dict, d: int, where: _Locator):
    values = {"kp": DEFAULT_GAINS.kp, "ki": DEFAULT_GAINS.ki,
              "k_alpha": DEFAULT_GAINS.k_alpha, "k_beta": DEFAULT_GAINS.k_beta}
    values.update({k: v for k, v in raw.items() if k in values})
    per_channel = any(isinstance(v, list) for v in values.values())
    if not per_channel:
        return _build("gains", "kp", where, PmaGains, **{k: float(v) for k, v in values.items()})
    for key, v in values.items():
        if isinstance(v, list) and len(v) != d:
            raise where.error(f"per-channel gain list needs {d} entries, got {len(v)}", "gains", key)
    columns = {k: (v if isinstance(v, list) else [v] * d) for k, v in values.items()}
    return tuple(
        _build("gains", "kp", where, PmaGains, **{k: float(columns[k][i]) for k in columns}) for i in range(d)
    )


def _search_space(raw: dict, gains, where: _Locator) -> SearchSpace:
    if not isinstance(gains, PmaGains):
        raise where.error("optimize mode tunes shared gains; per-channel gain lists are not searchable",
                          "gains", None)
    defaults = {p.name: p for p in default_search_space(gains).parameters}
    params = []
    for name in GAIN_NAMES:
        spec = raw.get(name, {})
        base = defaults[name]
        params.append(Parameter(
            name,
            float(spec.get("lower", base.lower)),
            float(spec.get("upper", base.upper)),
            float(spec.get("initial", base.initial)),
            float(spec.get("mesh", base.mesh)),
            bool(spec.get("log", base.log_scale)),
        ))
    return _build("optimizer", None, where, SearchSpace, tuple(params))


def parse_config(text: str, mode: str | None = None) -> RunConfig:
    """Parse and validate configuration text; raises ConfigurationError naming key and line.

    ``mode`` overrides the top-level ``mode`` key.
    """
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigurationError(f"malformed config: {exc}", line=int(m.group(1)) if m else None) from None
    where = _Locator(text)
    _check_schema(data, where)

    mode = _enum(Mode, mode or data.get("mode", Mode.CLOSED_LOOP.value), where, None, "mode")
    output = data.get("output", "pma")

    m = data.get("model", {})
    kind = _enum(ModelKind, m.get("kind", ModelKind.BIASED_LINEAR_SINK.value), where, "model", "kind")
    attractor = np.array(m.get("attractor", DEFAULT_ATTRACTOR), dtype=float)
    d = attractor.size
    default_bias = DEFAULT_BIAS if d == len(DEFAULT_BIAS) else [0.0] * d
    if "bias" in m and len(m["bias"]) != d:
        raise where.error(f"bias needs {d} entries", "model", "bias")
    model = _build(
        "model", "attractor", where, VectorFieldModel,
        kind, attractor,
        rate=np.array(m["rate"], dtype=float) if isinstance(m.get("rate"), list) else float(m.get("rate", 1.0)),
        bias=np.array(m.get("bias", default_bias), dtype=float),
        swirl=float(m.get("swirl", 0.0)),
    )
    xi0 = np.array(m.get("initial_state", [0.0] * d), dtype=float)
    if xi0.size != d:
        raise where.error(f"initial_state needs {d} entries", "model", "initial_state")

    gains_raw = data.get("gains", {})
    gains = _gains(gains_raw, d, where)
    composition = gains_raw.get("composition", PRODUCT)
    if composition not in (PRODUCT, ADDITIVE):
        raise where.error(f"composition must be '{PRODUCT}' or '{ADDITIVE}'", "gains", "composition")

    i = data.get("integrator", {})
    integrator = _build("integrator", "h", where, IntegratorConfig,
                        h=float(i.get("h", 0.01)), mu=float(i.get("mu", 0.99)), t_final=float(i.get("t_final", 4.0)))

    r = data.get("reference", {})
    reference = _build(
        "reference", "target", where, ReferenceSpec,
        _enum(ReferenceKind, r.get("kind", ReferenceKind.EXP_APPROACH.value), where, "reference", "kind"),
        np.array(r.get("target", attractor), dtype=float),
        rate=float(r.get("rate", 1.0)),
    )
    if reference.target.size != d:
        raise where.error(f"reference target needs {d} entries", "reference", "target")

    w = data.get("disturbance", {})
    dkind = _enum(DisturbanceKind, w.get("kind", DisturbanceKind.NONE.value), where, "disturbance", "kind")
    disturbance = _build(
        "disturbance", "t_alpha", where, DisturbanceProfile,
        dkind,
        t_alpha=float(w.get("t_alpha", 1.74)),
        t_beta=float(w.get("t_beta", 1.81)),
        seed=float(w["seed"]) if "seed" in w else None,
        increment=float(w.get("increment", 0.1)),
        components=tuple(w["components"]) if "components" in w else None,
    )
    _build("disturbance", "t_beta", where, disturbance.validate, integrator.t_final, d)
    if mode is Mode.DISTURB:
        if dkind is DisturbanceKind.NONE:
            raise where.error("disturb mode needs a disturbance kind", "disturbance", "kind")
        if disturbance.t_alpha < 0:
            raise where.error("disturbance window must start at t >= 0", "disturbance", "t_alpha")

    optimizer = None
    o = data.get("optimizer", {})
    if mode is Mode.OPTIMIZE or o:
        budget = o.get("budget", 2000)
        if budget < 1:
            raise where.error("budget must be at least 1", "optimizer", "budget")
        mesh_tol = float(o.get("mesh_tol", 1e-3))
        if not mesh_tol > 0:
            raise where.error("mesh_tol must be positive", "optimizer", "mesh_tol")
        optimizer = OptimizerSettings(_search_space(o, gains, where), budget, mesh_tol)

    return RunConfig(
        mode=mode,
        model=model,
        gains=gains,
        reference=reference,
        disturbance=disturbance,
        integrator=integrator,
        xi0=xi0,
        output=output,
        composition=composition,
        optimizer=optimizer,
    )
