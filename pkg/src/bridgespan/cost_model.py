"""Parametric bridge cost per unit deck area and its economic span.

Cost per square metre of deck for a span ``x`` (metres) is::

    a + b * x**m  +  c * x**(-r)
    \\___________/   \\_________/
    superstructure  substructure

The superstructure term folds the deck-system price into ``a`` and the
load-bearing power law into ``b, m``.  The substructure term is the cost of
one pier spread over one span, ``c * x**(1 - r) / x``, with ``r = 1 - 1/n``
for a pier power law ``x**(1/n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class MaterialCostParams:
    """Coefficients of one material's unit-area cost function.

    ``a`` deck-system constant (yuan/m2), ``b``/``m`` load-bearing
    coefficient and exponent, ``c``/``r`` pier coefficient and per-length
    exponent.
    """

    name: str
    a: float
    b: float
    m: float
    c: float
    r: float

    def __post_init__(self) -> None:
        for field in ("a", "b", "m", "c", "r"):
            value = getattr(self, field)
            if not math.isfinite(value):
                raise ValueError(f"{self.name}: {field} must be finite, got {value}")
        if self.a < 0:
            raise ValueError(f"{self.name}: a must be >= 0, got {self.a}")
        if self.b <= 0 or self.c <= 0:
            raise ValueError(f"{self.name}: b and c must be > 0")
        if self.m < 1:
            raise ValueError(f"{self.name}: m must be >= 1, got {self.m}")
        if not 0 < self.r < 1:
            raise ValueError(f"{self.name}: r must lie in (0, 1), got {self.r}")

    @property
    def n(self) -> float:
        """Pier power-law denominator, ``x**(1/n)`` per pier."""
        return 1.0 / (1.0 - self.r)

    def scaled(self, k: float) -> "MaterialCostParams":
        """Same material with ``b`` and ``c`` multiplied by ``k``."""
        return MaterialCostParams(self.name, self.a, self.b * k, self.m, self.c * k, self.r)


CONCRETE = MaterialCostParams("concrete", a=250.0, b=40.0, m=1.2, c=50000.0, r=0.5)
COMPOSITE = MaterialCostParams("composite", a=500.0, b=90.0, m=1.07, c=45000.0, r=0.5)
STEEL = MaterialCostParams("steel", a=2000.0, b=140.0, m=1.0, c=40000.0, r=0.5)

#: Row order of the gridworld: 0 concrete, 1 steel-concrete composite, 2 steel.
DEFAULT_MATERIALS: tuple[MaterialCostParams, ...] = (CONCRETE, COMPOSITE, STEEL)


@dataclass(frozen=True)
class CostBreakdown:
    superstructure: float
    substructure: float
    total: float
    length: float = 1.0


@dataclass(frozen=True)
class EconomicSpanResult:
    span_star: float
    unit_cost_star: float
    balance_ratio_star: float


def _check_span(x: float) -> float:
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise ValueError(f"span must be a positive finite number, got {x}")
    return x


def superstructure_cost(p: MaterialCostParams, x: float) -> float:
    x = _check_span(x)
    return p.a + p.b * x**p.m


def substructure_cost(p: MaterialCostParams, x: float) -> float:
    x = _check_span(x)
    return p.c * x ** (-p.r)


def unit_area_cost(p: MaterialCostParams, x: float) -> float:
    """Total cost per square metre of deck at span ``x``."""
    return superstructure_cost(p, x) + substructure_cost(p, x)


def total_cost(p: MaterialCostParams, x: float, length: float) -> CostBreakdown:
    """Costs over a bridge of total ``length`` per unit deck width.

    The pier count ``length / x`` is kept fractional.
    """
    length = float(length)
    if not length > 0 or not math.isfinite(length):
        raise ValueError(f"length must be a positive finite number, got {length}")
    upper = superstructure_cost(p, x) * length
    under = substructure_cost(p, x) * length
    return CostBreakdown(superstructure=upper, substructure=under, total=upper + under, length=length)


def cost_derivative(p: MaterialCostParams, x: float) -> float:
    x = _check_span(x)
    return p.b * p.m * x ** (p.m - 1.0) - p.c * p.r * x ** (-p.r - 1.0)


def balance_ratio(p: MaterialCostParams, x: float) -> float:
    """Single-span load-bearing cost over single-pier cost.

    Equals ``(n - 1) / (m * n)`` at the economic span.
    """
    x = _check_span(x)
    return (p.b * x**p.m) / (p.c * x ** (-p.r))


def _result(p: MaterialCostParams, span: float) -> EconomicSpanResult:
    return EconomicSpanResult(
        span_star=span,
        unit_cost_star=unit_area_cost(p, span),
        balance_ratio_star=balance_ratio(p, span),
    )


def economic_span_closed_form(p: MaterialCostParams) -> EconomicSpanResult:
    """Root of the cost derivative, ``(c r / (b m)) ** (1 / (m + r))``."""
    span = (p.c * p.r / (p.b * p.m)) ** (1.0 / (p.m + p.r))
    return _result(p, span)


def golden_section_minimize(
    f: Callable[[float], float], lo: float, hi: float, tol: float
) -> float:
    """Minimizer of a unimodal ``f`` on ``[lo, hi]`` to within ``tol``."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    a, b = float(lo), float(hi)
    h = b - a
    c = a + INV_PHI_SQ * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + INV_PHI_SQ * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
    return 0.5 * (a + b)


def economic_span_numeric(
    p: MaterialCostParams, lo: float = 1.0, hi: float = 1000.0, tol: float = 1e-6
) -> EconomicSpanResult:
    """Economic span by golden-section search on the unit-area cost."""
    if not lo > 0:
        raise ValueError(f"lo must be > 0, got {lo}")
    span = golden_section_minimize(lambda x: unit_area_cost(p, x), lo, hi, tol)
    return _result(p, span)


def material_by_name(name: str) -> MaterialCostParams:
    for p in DEFAULT_MATERIALS:
        if p.name == name:
            return p
    raise KeyError(f"unknown material {name!r}")
