"""Experiment configuration: a versioned YAML file validated by pydantic."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .kernels import (INTENSITY_MODES, IntensitySpec, KernelSpec, Region, RegimeSpec, Scale,
                      as_fraction)
from .partitions import PatternGraph

CONFIG_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GraphConfig(_Strict):
    name: Optional[str] = "edge"
    edges: Optional[list[tuple[int, int]]] = None

    def build(self) -> PatternGraph:
        if self.edges is not None:
            return PatternGraph.from_edges(self.edges, name=self.name or "custom")
        return parse_graph(self.name or "edge")


_NAMED = re.compile(r"^(edge|triangle|path|cycle|star|complete)(?:\((\d+)\)|(\d+))?$")


def parse_graph(text: str) -> PatternGraph:
    """Named graphs: edge, triangle, path3, path(4), cycle(k), star(k), complete(k),
    or an edge list such as ``1-2,2-3``."""
    text = text.strip().replace(" ", "")
    m = _NAMED.match(text)
    if m:
        kind, a, b = m.groups()
        k = int(a or b) if (a or b) else None
        if kind == "edge":
            return PatternGraph.edge()
        if kind == "triangle":
            return PatternGraph.triangle()
        if k is None:
            raise ValueError(f"graph {kind!r} needs a size, e.g. {kind}(4)")
        return getattr(PatternGraph, kind)(k)
    try:
        edges = [tuple(int(v) for v in e.split("-")) for e in text.split(",")]
    except ValueError as exc:
        raise ValueError(f"cannot parse graph {text!r}") from exc
    return PatternGraph.from_edges(edges, name="custom")


class RegionConfig(_Strict):
    shape: Literal["torus", "box", "ball"] = "torus"
    d: int = 2
    sides: list[float] = Field(default_factory=lambda: [1.0])
    radius: float = 1.0

    def build(self) -> Region:
        return Region(self.shape, self.d, tuple(self.sides), self.radius)


class ScaleConfig(_Strict):
    base: float = 1.0
    alpha: float = 0.0


class KernelConfig(_Strict):
    family: Literal["boolean", "rayleigh", "power_law", "constant"] = "boolean"
    R: float = 0.1
    beta: float = 1.0
    p: float = 1.0
    scale: ScaleConfig = Field(default_factory=ScaleConfig)
    radius_exponent: float = 0.0

    def build(self) -> KernelSpec:
        return KernelSpec(self.family, R=self.R, beta=self.beta, p=self.p,
                          scale=Scale(self.scale.base, self.scale.alpha),
                          radius_exponent=self.radius_exponent)


class IntensityConfig(_Strict):
    mode: str = "scaled_intensity"
    region: RegionConfig = Field(default_factory=RegionConfig)
    lam: float = 30.0

    @field_validator("mode")
    @classmethod
    def _mode(cls, v):
        if v not in INTENSITY_MODES:
            raise ValueError(f"mode must be one of {INTENSITY_MODES}")
        return v

    def build(self, lam: float | None = None) -> IntensitySpec:
        return IntensitySpec(self.mode, self.region.build(), self.lam if lam is None else lam)


class RegimeConfig(_Strict):
    regime: Literal["dilute", "sparse", "rgg_dense", "rgg_thermodynamic", "rgg_sparse"] = "dilute"
    alpha: float = 0.0
    radius_base: float = 1.0
    radius_exponent: float = 0.0
    d: int = 2

    def build(self) -> RegimeSpec:
        return RegimeSpec(self.regime, self.alpha, self.radius_base, self.radius_exponent, self.d)


class BudgetConfig(_Strict):
    mc_samples: int = 200_000
    max_cost: float = 2e9
    time_budget: Optional[float] = None


class OutputConfig(_Strict):
    csv_path: Optional[str] = None
    json_path: Optional[str] = None


class ExperimentConfig(_Strict):
    version: int = CONFIG_VERSION
    command: Optional[Literal["moment", "cumulant", "simulate", "scaling"]] = None
    graph: GraphConfig = Field(default_factory=GraphConfig)
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    intensity: IntensityConfig = Field(default_factory=IntensityConfig)
    regime: Optional[RegimeConfig] = None
    lambdas: list[float] = Field(default_factory=lambda: [20.0, 40.0, 80.0, 160.0])
    orders: list[int] = Field(default_factory=lambda: [2])
    replicates: int = 1000
    budget: BudgetConfig = Field(default_factory=BudgetConfig)
    seed: int = 0
    workers: Optional[int] = None
    exact: bool = False
    sampler: Literal["auto", "uniform", "spanning_tree"] = "auto"
    output: OutputConfig = Field(default_factory=OutputConfig)

    @field_validator("version")
    @classmethod
    def _version(cls, v):
        if v != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {v} (expected {CONFIG_VERSION})")
        return v

    @field_validator("orders")
    @classmethod
    def _orders(cls, v):
        if not v or any(k < 1 for k in v):
            raise ValueError("orders must be positive integers")
        return v

    @field_validator("replicates", "workers")
    @classmethod
    def _positive(cls, v):
        if v is not None and v < 1:
            raise ValueError("must be >= 1")
        return v

    def regime_spec(self) -> RegimeSpec:
        if self.regime is not None:
            return self.regime.build()
        return infer_regime(self.kernel.build(), self.intensity.region.d)


def infer_regime(kernel: KernelSpec, d: int) -> RegimeSpec:
    """Regime implied by the kernel's lambda-scaling."""
    if kernel.family == "boolean" and kernel.radius_exponent > 0:
        de = d * as_fraction(kernel.radius_exponent)
        kind = "rgg_dense" if de < 1 else "rgg_thermodynamic" if de == 1 else "rgg_sparse"
        return RegimeSpec(kind, 0.0, kernel.R, kernel.radius_exponent, d)
    alpha = kernel.scale.alpha
    return RegimeSpec("sparse" if alpha >= 1 else "dilute", alpha, d=d)


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a YAML config (or start from defaults) and apply dotted-key overrides."""
    data: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is not None and not isinstance(loaded, dict):
            raise ValueError("config file must hold a mapping")
        data = loaded or {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return ExperimentConfig.model_validate(data)
