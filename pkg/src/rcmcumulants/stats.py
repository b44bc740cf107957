"""Empirical cumulants, normal approximation diagnostics, scaling fits and rates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .kernels import RegimeError, RegimeSpec, as_fraction, classify_tree_cycle, zeta_exponent
from .partitions import PatternGraph


class DegreesOfFreedomError(ValueError):
    """Too few samples for the requested estimator."""


class RegimeViolation(RegimeError):
    """Fit inputs inconsistent with a power law (non-positive values)."""


# -- k-statistics ------------------------------------------------------------------

MIN_SAMPLES = {1: 2, 2: 2, 3: 3, 4: 5}


def _kstats_from_sums(n, s1, s2, s3, s4):
    """k1..k4 from power sums; arrays or scalars, exact for Fractions."""
    k1 = s1 / n
    k2 = (n * s2 - s1 ** 2) / (n * (n - 1))
    k3 = (2 * s1 ** 3 - 3 * n * s1 * s2 + n ** 2 * s3) / (n * (n - 1) * (n - 2)) if n >= 3 else None
    if n >= 4:
        k4 = (-6 * s1 ** 4 + 12 * n * s1 ** 2 * s2 - 3 * n * (n - 1) * s2 ** 2
              - 4 * n * (n + 1) * s1 * s3 + n ** 2 * (n + 1) * s4) / (n * (n - 1) * (n - 2) * (n - 3))
    else:
        k4 = None
    return [k1, k2, k3, k4]


@dataclass
class KStatistics:
    n: int
    values: list
    std_errors: list

    def __getitem__(self, order: int):
        return self.values[order - 1]

    @property
    def k1(self):
        return self.values[0]

    @property
    def k2(self):
        return self.values[1]

    @property
    def k3(self):
        return self.values[2]

    @property
    def k4(self):
        return self.values[3]

    def to_json(self) -> dict:
        return {"n": self.n,
                "k": [None if v is None else float(v) for v in self.values],
                "std_error": [None if s is None else float(s) for s in self.std_errors]}


def k_statistics(samples: Sequence, exact: bool = False) -> KStatistics:
    """Unbiased estimators k1..k4 with jackknife standard errors.

    Power sums are taken about the sample mean, which leaves k2..k4 unchanged
    and avoids cancellation.  With ``exact=True`` integer or Fraction input is
    processed in rational arithmetic.  Orders lacking enough samples (k3 needs
    3, k4 needs 5) come back as None.
    """
    n = len(samples)
    if n < 2:
        raise DegreesOfFreedomError(f"k-statistics need at least 2 samples, got {n}")
    if exact:
        xs = [Fraction(x) for x in samples]
        mean = sum(xs, Fraction(0)) / n
        c = [x - mean for x in xs]
        sums = [sum(x ** p for x in c) for p in (1, 2, 3, 4)]
        values = _kstats_from_sums(n, *sums)
        values[0] = mean
    else:
        x = np.asarray(samples, dtype=float)
        mean = float(np.mean(x))
        c = x - mean
        sums = [float(np.sum(c ** p)) for p in (1, 2, 3, 4)]
        values = _kstats_from_sums(n, *sums)
        values[0] = mean
    if n < MIN_SAMPLES[4]:
        values[3] = None
    errors = _jackknife(np.asarray([float(s) for s in samples]), values)
    return KStatistics(n, values, errors)


def _jackknife(x: np.ndarray, values: list) -> list:
    n = len(x)
    errors: list = [None] * 4
    if n < 3:
        return errors
    c = x - x.mean()
    sums = [np.sum(c ** p) for p in (1, 2, 3, 4)]
    loo = _kstats_from_sums(n - 1, *[s - c ** p for s, p in zip(sums, (1, 2, 3, 4))])
    loo[0] = loo[0] + x.mean()
    for k in range(4):
        if values[k] is None or loo[k] is None:
            continue
        theta = np.asarray(loo[k], dtype=float)
        errors[k] = float(math.sqrt((n - 1) / n * np.sum((theta - theta.mean()) ** 2)))
    return errors


# -- normal approximation ---------------------------------------------------------

def ks_distance_to_normal(samples: Sequence[float], center: float | None = None,
                          scale: float | None = None) -> float:
    """sup_x |F_N(x) - Phi(x)| for the standardized sample (x - center) / scale.

    Missing ``center``/``scale`` fall back to the sample mean and standard
    deviation.  Phi is scipy's ``ndtr`` (double precision).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("KS distance of an empty sample")
    if center is None:
        center = float(np.mean(x))
    if scale is None:
        if n < 2:
            raise DegreesOfFreedomError("estimating the scale needs at least 2 samples")
        scale = float(np.std(x, ddof=1))
    if not scale > 0:
        raise ValueError("scale must be positive")
    phi = ndtr((x - center) / scale)
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(i / n - phi)), np.max(np.abs((i - 1) / n - phi))))


# -- scaling fits -----------------------------------------------------------------

@dataclass
class ScalingFit:
    slope: float
    stderr: float
    intercept: float
    weighted: bool

    def to_json(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "intercept": self.intercept,
                "weighted": self.weighted}


def fit_scaling_exponent(lams: Sequence[float], values: Sequence[float],
                         errors: Sequence[float] | None = None) -> ScalingFit:
    """Least squares of log(value) on log(lambda).

    With positive error bars the fit is weighted by the log-scale variances
    (err / value)^2 and the slope error is the absolute-sigma one; otherwise the
    error comes from the residuals.
    """
    lams = np.asarray(lams, dtype=float)
    vals = np.asarray([float(v) for v in values])
    if len(lams) != len(vals):
        raise ValueError("lambda grid and values differ in length")
    if len(lams) < 3:
        raise ValueError("a scaling fit needs at least 3 grid points")
    if np.any(vals <= 0) or np.any(lams <= 0):
        bad = [float(l) for l, v in zip(lams, vals) if v <= 0]
        raise RegimeViolation(f"non-positive values at lambda = {bad}; no power law to fit")
    x, y = np.log(lams), np.log(vals)
    weighted = errors is not None and all(float(e) > 0 for e in errors)
    w = (vals / np.asarray(errors, dtype=float)) ** 2 if weighted else np.ones_like(x)
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    if weighted:
        stderr = math.sqrt(1.0 / sxx)
    else:
        resid = y - (intercept + slope * x)
        stderr = math.sqrt(float(np.sum(resid ** 2)) / (len(x) - 2) / sxx)
    return ScalingFit(slope, stderr, intercept, weighted)


# -- rates ------------------------------------------------------------------------

@dataclass(frozen=True)
class RatePrediction:
    """Statulevicius-type exponents: |kappa_n| <= (n!)^(1+gamma) / Delta^(n-2),
    Delta ~ lambda^delta_exponent, Kolmogorov distance ~ lambda^(-ks_rate)."""

    gamma: Fraction
    delta_exponent: Fraction
    ks_rate: Fraction
    regime: str

    def to_json(self) -> dict:
        return {"gamma": str(self.gamma), "delta_exponent": str(self.delta_exponent),
                "ks_rate": str(self.ks_rate), "regime": self.regime}


def rate_prediction(g: PatternGraph, regime: RegimeSpec) -> RatePrediction:
    r = g.r
    gamma = Fraction(r - 1)
    kind = regime.regime
    if kind == "dilute":
        a = as_fraction(regime.alpha)
        if a < 0 or a * zeta_exponent(g) >= 1:
            raise RegimeError(f"dilute regime needs 0 <= alpha * zeta < 1, got alpha = {regime.alpha}")
        delta = Fraction(1, 2)
    elif kind == "sparse":
        a = as_fraction(regime.alpha)
        if classify_tree_cycle(g) != "tree":
            raise RegimeError("sparse regime with a pattern that is not a tree: the cumulant growth "
                              "bounds do not yield a Kolmogorov rate that tends to zero")
        if not 1 <= a < Fraction(r, r - 1):
            raise RegimeError(f"sparse tree rates need 1 <= alpha < r/(r-1) = {Fraction(r, r - 1)}, "
                              f"got alpha = {regime.alpha}")
        delta = (a - (a - 1) * r) / 2
    elif kind in ("rgg_dense", "rgg_thermodynamic"):
        delta = Fraction(1, 2)
    else:
        de = regime.decay
        if not 1 < de < Fraction(r, r - 1):
            raise RegimeError(f"sparse RGG regime needs 1 < d * exponent < r/(r-1), got {de}")
        delta = (r - de * (r - 1)) / 2
    return RatePrediction(gamma, delta, delta / (1 + 2 * gamma), kind)


# -- concentration ---------------------------------------------------------------

@dataclass
class ConcentrationRow:
    x: float
    empirical_tail: float
    bound: float
    bound_x_free: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def concentration_check(standardized: Sequence[float], x_grid: Sequence[float], lam: float, r: int,
                        K: float = 1.0, delta_exponent: float = 0.5) -> list[ConcentrationRow]:
    """Empirical P(|Z| >= x) next to the Statulevicius tail bound.

    ``bound`` is 2 exp(-1/4 min(x^2 / 2^(1/(1+gamma)), (x Delta)^(1/(1+gamma))))
    with gamma = r - 1 and Delta = (K lambda)^delta_exponent.  ``bound_x_free``
    is the x-independent shape 2 exp(-1/4 (K lambda)^(1/r)).  K is unknown in
    theory and set to 1; the columns are diagnostics, not gates.
    """
    z = np.abs(np.asarray(standardized, dtype=float))
    if len(z) < 1000:
        raise DegreesOfFreedomError(f"concentration check needs at least 1000 samples, got {len(z)}")
    gamma = r - 1
    delta = (K * lam) ** delta_exponent
    free = 2 * math.exp(-0.25 * (K * lam) ** (1 / r))
    rows = []
    for x in x_grid:
        tail = float(np.mean(z >= x))
        expo = min(x * x / 2 ** (1 / (1 + gamma)), (x * delta) ** (1 / (1 + gamma)))
        rows.append(ConcentrationRow(float(x), tail, 2 * math.exp(-0.25 * expo), free))
    return rows
