"""Connection kernels, observation regions, intensity measures and regimes."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate, special

from .partitions import PatternGraph

KERNEL_FAMILIES = ("boolean", "rayleigh", "power_law", "constant")
REGION_SHAPES = ("torus", "box", "ball")
INTENSITY_MODES = ("scaled_intensity", "growing_window")
REGIMES = ("dilute", "sparse", "rgg_dense", "rgg_thermodynamic", "rgg_sparse")


class RegimeError(ValueError):
    """Inadmissible regime parameters."""


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


# -- regions ---------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """An axis-aligned box, a flat torus, or a centred ball in R^d."""

    shape: str = "torus"
    d: int = 2
    sides: tuple[float, ...] = (1.0, 1.0)
    radius: float = 1.0

    def __post_init__(self):
        if self.shape not in REGION_SHAPES:
            raise ValueError(f"unknown region shape {self.shape!r}")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.shape == "ball":
            if self.radius <= 0:
                raise ValueError("ball radius must be positive")
        else:
            sides = tuple(float(s) for s in self.sides)
            if len(sides) == 1 and self.d > 1:
                sides = sides * self.d
            if len(sides) != self.d:
                raise ValueError(f"need {self.d} side lengths, got {len(sides)}")
            if any(s <= 0 for s in sides):
                raise ValueError("side lengths must be positive")
            object.__setattr__(self, "sides", sides)

    @property
    def volume(self) -> float:
        if self.shape == "ball":
            return unit_ball_volume(self.d) * self.radius ** self.d
        return math.prod(self.sides)

    @property
    def periodic(self) -> bool:
        return self.shape == "torus"

    def scaled(self, factor: float) -> "Region":
        """Region with every linear dimension multiplied by ``factor``."""
        if self.shape == "ball":
            return Region("ball", self.d, self.sides, self.radius * factor)
        return Region(self.shape, self.d, tuple(s * factor for s in self.sides), self.radius)

    def sample_uniform(self, rng: np.random.Generator, k: int) -> np.ndarray:
        if self.shape == "ball":
            g = rng.standard_normal((k, self.d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            rad = self.radius * rng.random(k) ** (1.0 / self.d)
            return g * rad[:, None]
        return rng.random((k, self.d)) * np.asarray(self.sides)

    def displacement(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """x - y, wrapped to the minimum image on a torus."""
        diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        if self.periodic:
            sides = np.asarray(self.sides)
            diff = diff - sides * np.round(diff / sides)
        return diff

    def distance(self, x, y) -> np.ndarray:
        return np.linalg.norm(self.displacement(x, y), axis=-1)

    def to_json(self) -> dict:
        out = {"shape": self.shape, "d": self.d}
        if self.shape == "ball":
            out["radius"] = self.radius
        else:
            out["sides"] = list(self.sides)
        return out


# -- kernels -------------------------------------------------------------------

@dataclass(frozen=True)
class Scale:
    """c_lambda = base * lambda^(-alpha)."""

    base: float = 1.0
    alpha: float = 0.0

    def at(self, lam: float) -> float:
        return self.base * lam ** (-self.alpha)

    def exact_at(self, lam) -> Fraction | None:
        a = as_fraction(self.alpha)
        if a.denominator != 1:
            return None
        return as_fraction(self.base) * as_fraction(lam) ** (-int(a))


@dataclass(frozen=True)
class KernelSpec:
    """Connection function H scaled by c_lambda.

    ``R`` is the Boolean radius at lambda = 1; with ``radius_exponent`` e the
    radius at intensity lambda is R * lambda^(-e).  ``lam_range`` is the
    intensity range over which 0 <= c_lambda H <= 1 is validated.
    """

    family: str = "boolean"
    R: float | None = None
    beta: float | None = None
    p: float | None = None
    scale: Scale = field(default_factory=Scale)
    radius_exponent: float = 0.0
    lam_range: tuple[float, float] = (1.0, math.inf)

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "boolean" and (self.R is None or self.R < 0):
            raise ValueError("boolean kernel needs a radius R >= 0")
        if self.family in ("rayleigh", "power_law") and (self.beta is None or self.beta <= 0):
            raise ValueError(f"{self.family} kernel needs beta > 0")
        if self.family == "constant" and (self.p is None or not 0 <= self.p <= 1):
            raise ValueError("constant kernel needs 0 <= p <= 1")
        if self.scale.base < 0:
            raise ValueError("scale base must be non-negative")
        lo, hi = self.lam_range
        if not 0 < lo <= hi:
            raise ValueError(f"invalid lambda range {self.lam_range}")
        worst = lo if self.scale.alpha >= 0 else hi
        if math.isinf(worst) or self.scale.at(worst) > 1 + 1e-15:
            raise ValueError(
                f"c_lambda exceeds 1 on the declared range {self.lam_range} "
                f"(base={self.scale.base}, alpha={self.scale.alpha})"
            )

    @property
    def translation_invariant(self) -> bool:
        return True

    def c(self, lam: float) -> float:
        return self.scale.at(lam)

    def radius(self, lam: float) -> float:
        if self.family != "boolean":
            raise ValueError("only boolean kernels have a radius")
        return self.R * lam ** (-self.radius_exponent)

    def h(self, dist, lam: float = 1.0) -> np.ndarray:
        """Unscaled H as a function of distance."""
        dist = np.asarray(dist, dtype=float)
        if self.family == "boolean":
            return (dist <= self.radius(lam)).astype(float)
        if self.family == "rayleigh":
            return np.exp(-self.beta * dist ** 2)
        if self.family == "power_law":
            with np.errstate(divide="ignore"):
                return np.minimum(1.0, dist ** (-self.beta))
        return np.full(dist.shape, float(self.p))

    def profile(self, dist, lam: float) -> np.ndarray:
        """Connection probability c_lambda H at the given distances."""
        return self.c(lam) * self.h(dist, lam)

    def value(self, x, y, lam: float, region: Region | None = None) -> np.ndarray:
        if region is not None:
            dist = region.distance(x, y)
        else:
            dist = np.linalg.norm(np.asarray(x, float) - np.asarray(y, float), axis=-1)
        return self.profile(dist, lam)

    def cutoff(self, lam: float, eps: float = 1e-12) -> float | None:
        """Distance beyond which c_lambda H < eps (None: no finite cutoff)."""
        c = self.c(lam)
        if self.family == "boolean":
            return self.radius(lam)
        if self.family == "rayleigh":
            if c <= eps:
                return 0.0
            return math.sqrt(math.log(c / eps) / self.beta)
        return None

    def check_region(self, region: Region, lam: float) -> None:
        if self.family == "boolean" and region.periodic:
            if 2 * self.radius(lam) >= min(region.sides):
                raise ValueError("torus sides must exceed 2R for Boolean kernels")

    def torus_integral(self, region: Region, lam: float) -> float | None:
        """Integral of H(0, y) dy over a torus (None where unavailable)."""
        if not region.periodic:
            return None
        d = region.d
        if self.family == "boolean":
            self.check_region(region, lam)
            return unit_ball_volume(d) * self.radius(lam) ** d
        if self.family == "constant":
            return self.p * region.volume
        if self.family == "rayleigh":
            s = math.sqrt(self.beta)
            return math.prod(math.sqrt(math.pi) / s * math.erf(s * L / 2) for L in region.sides)
        return _power_law_torus_integral(self.beta, region.sides)

    def to_json(self) -> dict:
        out = {"family": self.family, "scale": {"base": self.scale.base, "alpha": self.scale.alpha}}
        if self.family == "boolean":
            out["R"] = self.R
            out["radius_exponent"] = self.radius_exponent
        elif self.family == "constant":
            out["p"] = self.p
        else:
            out["beta"] = self.beta
        return out


def _power_law_torus_integral(beta: float, sides: tuple[float, ...]) -> float:
    def f(*y):
        r = math.sqrt(sum(t * t for t in y))
        return 1.0 if r <= 1.0 else r ** (-beta)

    # symmetric integrand: integrate over the positive orthant
    ranges = [(0.0, L / 2) for L in sides]
    opts = [{"points": [1.0]} if L / 2 > 1 else {} for L in sides]
    val, _ = integrate.nquad(f, ranges, opts=opts)
    return val * 2 ** len(sides)


# -- intensity measures ---------------------------------------------------------

@dataclass(frozen=True)
class IntensitySpec:
    """Intensity Lambda_lambda over a base region.

    ``scaled_intensity``: Lambda = lambda * Lebesgue on ``region``.
    ``growing_window``: Lambda = Lebesgue on ``region`` dilated by lambda^(1/d),
    so the total mass is lambda * vol(region) in both modes.
    """

    mode: str = "scaled_intensity"
    region: Region = field(default_factory=Region)
    lam: float = 1.0

    def __post_init__(self):
        if self.mode not in INTENSITY_MODES:
            raise ValueError(f"unknown intensity mode {self.mode!r}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    def with_lam(self, lam: float) -> "IntensitySpec":
        return IntensitySpec(self.mode, self.region, lam)

    @property
    def window(self) -> Region:
        if self.mode == "growing_window":
            return self.region.scaled(self.lam ** (1.0 / self.region.d))
        return self.region

    @property
    def density(self) -> float:
        return self.lam if self.mode == "scaled_intensity" else 1.0

    @property
    def total_mass(self) -> float:
        return self.density * self.window.volume

    def exact_density_volume(self) -> tuple[Fraction, Fraction] | None:
        """(density, window volume) as rationals when both are exact."""
        if self.region.shape == "ball":
            return None
        if self.mode == "growing_window":
            return Fraction(1), as_fraction(self.lam) * math.prod(as_fraction(s) for s in self.region.sides)
        return as_fraction(self.lam), math.prod((as_fraction(s) for s in self.region.sides), start=Fraction(1))

    def to_json(self) -> dict:
        return {"mode": self.mode, "region": self.region.to_json(), "lam": self.lam}


# -- graph exponents and regimes --------------------------------------------------

def zeta_exponent(g: PatternGraph) -> Fraction:
    """max |E(H)| / (|V(H)| - 1) over connected subgraphs with >= 2 vertices."""
    if g.r < 2:
        raise ValueError("zeta needs at least two vertices")
    if g.r > 12:
        raise ValueError("zeta_exponent scans vertex subsets; r <= 12")
    adj = g.adjacency()
    best = Fraction(0)
    verts = range(1, g.r + 1)
    for k in range(2, g.r + 1):
        for sub in itertools.combinations(verts, k):
            s = set(sub)
            seen = {sub[0]}
            stack = [sub[0]]
            while stack:
                v = stack.pop()
                for w in adj[v] & s:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            if len(seen) != k:
                continue
            e = sum(1 for i, j in g.edges if i in s and j in s)
            best = max(best, Fraction(e, k - 1))
    return best


def classify_tree_cycle(g: PatternGraph) -> str:
    m = len(g.edges)
    if m == g.r - 1:
        return "tree"
    if m == g.r and all(len(nb) == 2 for nb in g.adjacency().values()):
        return "cycle"
    return "other"


@dataclass(frozen=True)
class RegimeSpec:
    """Asymptotic coupling of the kernel with lambda.

    ``alpha`` is the lambda-exponent of c_lambda = K lambda^(-alpha) (dilute and
    sparse regimes).  For the random geometric graph regimes the radius is
    R_lambda = radius_base * lambda^(-radius_exponent) in dimension ``d``.
    """

    regime: str = "dilute"
    alpha: float = 0.0
    radius_base: float = 1.0
    radius_exponent: float = 0.0
    d: int = 2

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise RegimeError(f"unknown regime {self.regime!r}")

    @property
    def decay(self) -> Fraction:
        """d * radius exponent: lambda R^d behaves like lambda^(1 - decay)."""
        return self.d * as_fraction(self.radius_exponent)

    def to_json(self) -> dict:
        return {"regime": self.regime, "alpha": self.alpha, "radius_base": self.radius_base,
                "radius_exponent": self.radius_exponent, "d": self.d}


def predicted_cumulant_exponent(g: PatternGraph, regime: RegimeSpec, n: int) -> tuple[Fraction, bool]:
    """Leading lambda-exponent of the n-th cumulant of the subgraph count.

    Returns ``(exponent, valid)`` where ``valid`` is False if the side
    conditions of the declared regime fail for these parameters.
    """
    if n < 1:
        raise ValueError("cumulant order must be >= 1")
    r, m = g.r, len(g.edges)
    kind = regime.regime
    if kind == "dilute":
        a = as_fraction(regime.alpha)
        if a < 0:
            raise RegimeError("dilute regime needs c_lambda bounded, i.e. alpha >= 0")
        exponent = 1 + (r - 1) * n - a * n * m
        return exponent, a * zeta_exponent(g) < 1
    if kind == "sparse":
        a = as_fraction(regime.alpha)
        if a < 1:
            raise RegimeError(f"sparse regime needs alpha >= 1, got {regime.alpha}")
        if classify_tree_cycle(g) == "tree":
            return a - (a - 1) * r, a < Fraction(r, r - 1)
        return r - a * m, True
    de = regime.decay
    if de < 0:
        raise RegimeError("radius exponent must be non-negative")
    if kind == "rgg_dense":
        return 1 + (r - 1) * n - de * (r - 1) * n, de <= 1
    if kind == "rgg_thermodynamic":
        return Fraction(1), de == 1
    return r - de * (r - 1), 1 < de < Fraction(r, r - 1)


def diagram_exponent(vertices: int, edges: int, regime: RegimeSpec) -> Fraction:
    """lambda-exponent of one connected diagram integral under ``regime``."""
    if regime.regime in ("dilute", "sparse"):
        return vertices - as_fraction(regime.alpha) * edges
    return vertices - regime.decay * (vertices - 1)
