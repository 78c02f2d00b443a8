"""Coverage path planning and boom section-control spray simulation.

Main entry points:

* :func:`load_field`, :func:`generate_fields` - field polygons
* :func:`build_lane_grid`, :func:`plan_m1`, :func:`plan_m2` - coverage paths
* :func:`simulate`, :func:`run_matrix` - spray maps, volumes, gap and overlap
* :mod:`spraysim.economics` - years until per-section control pays off
* :mod:`spraysim.scenarios` - scripted paths and overlap-filter comparison
"""

from .economics import CostParams, breakeven_volume, cost_table, field_runs_to_profit, years_to_profit
from .field_io import FieldSpec, RunConfig, generate_fields, load_config, load_field, save_field, validate_config
from .planner import PathPlan, build_lane_grid, plan_m1, plan_m2
from .simulator import CoverageMetrics, MatrixResult, SprayMap, expected_volume, run_batch, run_matrix, simulate

__version__ = "0.1.0"

__all__ = [
    "CostParams", "breakeven_volume", "cost_table", "field_runs_to_profit", "years_to_profit",
    "FieldSpec", "RunConfig", "generate_fields", "load_config", "load_field", "save_field", "validate_config",
    "PathPlan", "build_lane_grid", "plan_m1", "plan_m2",
    "CoverageMetrics", "MatrixResult", "SprayMap", "expected_volume", "run_batch", "run_matrix", "simulate",
]
