"""Cost model comparing per-section spray control against a coarser boom.

All functions are pure; monetary values are kept in double precision and
only rounded when written out.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, replace


class NeverProfitable(ArithmeticError):
    """Savings per year are zero, so the investment is never recovered."""


@dataclass(frozen=True)
class CostParams:
    C_chemical: float = 30.0  # EUR per litre of chemical
    C_water: float = 0.002  # EUR per litre of water
    water_ratio: float = 0.99
    dK_ASC: float = 100_000.0  # purchase premium, EUR
    A_total: float = 30.0  # ha sprayed per run
    N_runs_field: float = 8.0  # runs per year

    def violations(self) -> list[str]:
        out = []
        if not 0.0 <= self.water_ratio <= 1.0:
            out.append("water_ratio must lie in [0, 1]")
        for name in ("C_chemical", "C_water", "dK_ASC"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                out.append(f"{name} must be finite and >= 0")
        for name in ("A_total", "N_runs_field"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                out.append(f"{name} must be finite and >= 0")
        return out

    def validate(self) -> "CostParams":
        bad = self.violations()
        if bad:
            raise ValueError("; ".join(bad))
        return self

    @property
    def per_litre(self) -> float:
        """Price of one litre of spray mixture."""
        return (1.0 - self.water_ratio) * self.C_chemical + self.water_ratio * self.C_water


@dataclass(frozen=True)
class CostResult:
    dS: float
    dC: float
    breakeven_volume: float
    N_years_star: float


def spray_delta(S_j: float, S_multi: float) -> float:
    """Extra volume applied by a coarse boom compared with per-section control."""
    if S_j < 0 or S_multi < 0:
        raise ValueError("spray volumes must be non-negative")
    return S_j - S_multi


def cost_delta(dS: float, p: CostParams) -> float:
    """Cost of ``dS`` litres of mixture."""
    return p.per_litre * dS


def breakeven_volume(p: CostParams) -> float:
    """Mixture volume whose cost equals the purchase premium."""
    c = p.per_litre
    if c <= 0:
        raise ZeroDivisionError("per-litre mixture cost is zero; break-even volume undefined")
    return p.dK_ASC / c


def field_runs_to_profit(dS_per_run: float, p: CostParams) -> float:
    """Number of field runs before savings of ``dS_per_run`` litres pay off."""
    saving = cost_delta(dS_per_run, p)
    if saving <= 0:
        raise NeverProfitable("no saving per run")
    return p.dK_ASC / saving


def years_to_profit(dS_per_ha: float, p: CostParams) -> float:
    """Years until per-hectare savings over ``A_total`` ha and ``N_runs_field`` runs repay the premium.

    Raises :class:`NeverProfitable` if the yearly saving is zero.
    """
    yearly = cost_delta(dS_per_ha, p) * p.A_total * p.N_runs_field
    if yearly <= 0:
        raise NeverProfitable("yearly saving is zero")
    return p.dK_ASC / yearly


def evaluate(dS: float, dS_per_ha: float, p: CostParams) -> CostResult:
    return CostResult(
        dS=dS,
        dC=cost_delta(dS, p),
        breakeven_volume=breakeven_volume(p),
        N_years_star=years_to_profit(dS_per_ha, p),
    )


# Default grid of the years-to-profit table.
DEFAULT_DELTAS = (18.6, 16.7, 22.5, 18.7)
DEFAULT_DK = (100_000.0, 200_000.0)
DEFAULT_AREAS = (30.0, 100.0, 300.0, 600.0, 1000.0)
DEFAULT_CCHEM = (10.0, 30.0)


def cost_table(
    deltas=DEFAULT_DELTAS,
    dK=DEFAULT_DK,
    areas=DEFAULT_AREAS,
    c_chem=DEFAULT_CCHEM,
    base: CostParams | None = None,
) -> dict[tuple[float, float, float, float], float]:
    """Years to profit for every ``(dS_per_ha, dK, A_total, C_chemical)`` combination."""
    base = base or CostParams()
    out = {}
    for d, k, a, c in itertools.product(deltas, dK, areas, c_chem):
        p = replace(base, dK_ASC=k, A_total=a, C_chemical=c)
        try:
            out[(d, k, a, c)] = years_to_profit(d, p)
        except NeverProfitable:
            out[(d, k, a, c)] = math.inf
    return out


def cost_table_csv(table: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dS_per_ha", "dK_ASC", "A_total", "C_chemical", "N_years_star"])
    for (d, k, a, c), years in sorted(table.items()):
        w.writerow([f"{d:g}", f"{k:.0f}", f"{a:g}", f"{c:g}", f"{years:.1f}"])
    return buf.getvalue()
