import math
import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from spraysim import economics as eco


def test_per_litre_cost():
    assert eco.CostParams().per_litre == pytest.approx(0.30198)
    assert eco.cost_delta(1.0, eco.CostParams()) == pytest.approx(0.30198)
    p = eco.CostParams(water_ratio=1.0)
    assert eco.cost_delta(10.0, p) == pytest.approx(10 * p.C_water)


def test_spray_delta():
    assert eco.spray_delta(89.9, 6.9) == pytest.approx(83.0)
    assert eco.spray_delta(5.0, 5.0) == 0
    with pytest.raises(ValueError):
        eco.spray_delta(-1.0, 0.0)


def test_breakeven():
    assert eco.breakeven_volume(eco.CostParams()) == pytest.approx(331_147, abs=1)
    assert eco.breakeven_volume(eco.CostParams(C_chemical=10)) == pytest.approx(980_584, abs=1)
    assert eco.breakeven_volume(eco.CostParams(dK_ASC=0)) == 0
    with pytest.raises(ZeroDivisionError):
        eco.breakeven_volume(eco.CostParams(C_chemical=0, C_water=0))


def test_years_examples():
    assert eco.years_to_profit(18.6, eco.CostParams()) == pytest.approx(74.2, abs=0.05)
    assert eco.years_to_profit(18.6, eco.CostParams(C_chemical=10)) == pytest.approx(219.7, abs=0.05)
    assert eco.years_to_profit(18.6, eco.CostParams(A_total=1000)) == pytest.approx(2.2, abs=0.05)
    with pytest.raises(eco.NeverProfitable):
        eco.years_to_profit(0.0, eco.CostParams())
    with pytest.raises(eco.NeverProfitable):
        eco.field_runs_to_profit(-1.0, eco.CostParams())


def test_evaluate_bundle():
    r = eco.evaluate(83.0, 18.6, eco.CostParams())
    assert r.dC == pytest.approx(25.06, abs=0.01)
    assert all(math.isfinite(x) and x >= 0 for x in (r.dS, r.dC, r.breakeven_volume, r.N_years_star))


def test_table_shape_speed_and_csv():
    t0 = time.perf_counter()
    table = eco.cost_table()
    assert time.perf_counter() - t0 < 1.0
    assert len(table) == 80
    assert table[(18.6, 200_000.0, 30.0, 30.0)] == pytest.approx(148.4, abs=0.05)
    text = eco.cost_table_csv(table)
    assert text.splitlines()[0] == "dS_per_ha,dK_ASC,A_total,C_chemical,N_years_star"
    assert len(text.splitlines()) == 81
    assert eco.cost_table_csv(eco.cost_table()) == text
    assert eco.cost_table(deltas=(0.0,), dK=(1.0,), areas=(1.0,), c_chem=(1.0,))[(0.0, 1.0, 1.0, 1.0)] == math.inf


def test_param_validation():
    assert eco.CostParams().violations() == []
    assert eco.CostParams(water_ratio=1.5).violations()
    with pytest.raises(ValueError):
        eco.CostParams(C_chemical=-1).validate()


@given(st.floats(0.1, 100), st.floats(1, 5000), st.floats(1, 50))
def test_years_scale_inversely(d, area, runs):
    p = eco.CostParams(A_total=area, N_runs_field=runs)
    q = eco.CostParams(A_total=2 * area, N_runs_field=runs)
    assert eco.years_to_profit(d, q) == pytest.approx(eco.years_to_profit(d, p) / 2)
