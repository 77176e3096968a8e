"""JSON run configuration.

Matrices are nested arrays of ``[re, im]`` pairs; regulated functions are
lists of ``{"start", "end", "poly"}`` segments with ascending local-variable
coefficients, each a ``[re, im]`` pair.  Unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .convergence import DEFAULT_EPSILONS, DEFAULT_OSC_DIMS, Scenario
from .elimination import PrelimModel
from .errors import ConfigError
from .operator_core import dagger
from .regulated import ExponentialVectorSpec, RegulatedFunction

HERMITIAN_TOL = 1e-12

Pair = tuple[float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _to_array(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def _square(rows, name: str) -> list:
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ValueError(f"{name} must be a non-empty square matrix")
    return rows


class Segment(_Strict):
    start: float
    end: float
    poly: list[Pair] = Field(min_length=1, max_length=4)

    @model_validator(mode="after")
    def _order(self):
        if not (0 <= self.start < self.end):
            raise ValueError("segment needs 0 <= start < end")
        return self


def _regulated(segments: Optional[list[Segment]]) -> Optional[RegulatedFunction]:
    if segments is None:
        return None
    return RegulatedFunction.from_segments(
        [(s.start, s.end, [complex(re, im) for re, im in s.poly]) for s in segments]
    )


class ModelBlock(_Strict):
    E11: list[list[Pair]]
    E10: list[list[Pair]]
    E01: Optional[list[list[Pair]]] = None
    E00: list[list[Pair]]
    gamma: float = Field(gt=0)

    @model_validator(mode="after")
    def _consistent(self):
        d = len(_square(self.E11, "E11"))
        for name in ("E10", "E01", "E00"):
            M = getattr(self, name)
            if M is None:
                continue
            if len(_square(M, name)) != d:
                raise ValueError(f"{name} has dimension {len(M)}, E11 has {d}")
        for name in ("E11", "E00"):
            A = _to_array(getattr(self, name))
            if np.linalg.norm(A - dagger(A), 2) > HERMITIAN_TOL:
                raise ValueError(f"{name} is not Hermitian")
        if self.E01 is not None:
            if np.linalg.norm(_to_array(self.E01) - dagger(_to_array(self.E10)), 2) > HERMITIAN_TOL:
                raise ValueError("E01 must equal the adjoint of E10")
        return self

    @property
    def dim(self) -> int:
        return len(self.E11)

    def build(self) -> PrelimModel:
        E10 = _to_array(self.E10)
        E01 = dagger(E10) if self.E01 is None else _to_array(self.E01)
        return PrelimModel(_to_array(self.E11), E10, E01, _to_array(self.E00), self.gamma)


class VectorSpec(_Strict):
    v: list[Pair] = Field(min_length=1)
    alpha: Pair = (0.0, 0.0)
    f: Optional[list[Segment]] = None

    def build(self) -> ExponentialVectorSpec:
        return ExponentialVectorSpec(
            np.array([complex(re, im) for re, im in self.v]), complex(*self.alpha), _regulated(self.f)
        )


class ScenarioBlock(_Strict):
    name: str
    mode: Literal["unitary", "heisenberg", "weyl"] = "unitary"
    horizon: float = Field(1.0, gt=0)
    epsilons: list[float] = Field(default_factory=lambda: list(DEFAULT_EPSILONS), min_length=1)
    osc_dims: list[int] = Field(default_factory=lambda: list(DEFAULT_OSC_DIMS), min_length=1)
    bra: VectorSpec
    ket: VectorSpec
    observable: Optional[list[list[Pair]]] = None
    weyl: Optional[list[Segment]] = None
    cross_check: bool = True

    @field_validator("epsilons")
    @classmethod
    def _decreasing(cls, eps):
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be positive and strictly decreasing")
        return eps

    @model_validator(mode="after")
    def _fields(self):
        if len(self.osc_dims) != len(self.epsilons):
            raise ValueError("osc_dims must have one entry per epsilon")
        if self.mode == "heisenberg" and self.observable is None:
            raise ValueError("heisenberg mode requires an observable")
        if self.mode == "weyl" and self.weyl is None:
            raise ValueError("weyl mode requires a weyl amplitude")
        if self.observable is not None:
            _square(self.observable, "observable")
        return self


class DiagramsBlock(_Strict):
    gamma: float = Field(2.0, gt=0)
    t_grid: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    eps_grid: list[float] = Field(default_factory=lambda: [0.5, 0.1, 0.02])
    max_vertices: int = Field(4, ge=1, le=6)
    limit_sweep: list[float] = Field(default_factory=lambda: [0.3, 0.1, 0.03, 0.01, 0.003, 0.001])
    omega_C: float = Field(1.0, ge=0)
    omega_C11: float = Field(1.0, ge=0)
    omega_t: float = Field(1.0, ge=0)
    omega_cutoff: int = Field(12, ge=0, le=40)


class OutputBlock(_Strict):
    dir: str = "out"
    format: Literal["json", "csv", "both"] = "both"


class Tolerances(_Strict):
    identity: float = Field(1e-10, gt=0)
    sweep_rel_err: float = Field(0.02, gt=0)
    flow_rtol: float = Field(1e-9, gt=0)


class Config(_Strict):
    version: Literal["1"] = "1"
    model: ModelBlock
    scenarios: list[ScenarioBlock] = Field(default_factory=list)
    diagrams: DiagramsBlock = Field(default_factory=DiagramsBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)
    tolerances: Tolerances = Field(default_factory=Tolerances)

    @model_validator(mode="after")
    def _dims(self):
        d = self.model.dim
        for k, s in enumerate(self.scenarios):
            for side in ("bra", "ket"):
                if len(getattr(s, side).v) != d:
                    raise ValueError(f"scenarios.{k}.{side}.v has length {len(getattr(s, side).v)}, model dimension {d}")
            if s.observable is not None and len(s.observable) != d:
                raise ValueError(f"scenarios.{k}.observable has dimension {len(s.observable)}, model dimension {d}")
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ValueError("scenario names must be unique")
        return self

    def canonical(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"

    def build_scenario(self, k: int) -> Scenario:
        s = self.scenarios[k]
        X = None if s.observable is None else _to_array(s.observable)
        return Scenario(
            s.name,
            self.model.build(),
            s.bra.build(),
            s.ket.build(),
            s.horizon,
            X=X,
            g=_regulated(s.weyl),
            epsilons=tuple(s.epsilons),
            osc_dims=tuple(s.osc_dims),
        )


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config_text(text: str) -> Config:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    try:
        return Config.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from exc


def parse_config(path) -> Config:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config_text(text)
