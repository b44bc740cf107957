"""Diagrammatic cumulants of subgraph counts in random connection models."""

from .partitions import (BudgetExceededError, DimensionError, GridPartition, PatternGraph,
                         QuotientGraph, SizeLimitError, enumerate_partitions, quotient_graph)
from .kernels import IntensitySpec, KernelSpec, Region, RegimeError, RegimeSpec, Scale

__version__ = "0.1.0"
