"""Day-ahead electricity market clearing under a CVaR reliability constraint."""

from cvarmarket.clearing import (
    AssumptionReport,
    AssumptionViolation,
    Branch,
    DispatchResult,
    Fleet,
    GeneratorSpec,
    GridParams,
    InfeasibleError,
    KKTResiduals,
    PriceResult,
    check_assumptions,
    clearing_price,
    dispatch,
    expected_cost,
    kkt_residuals,
    shortfall_diagnostic,
    solve_total_power,
    table_one_fleet,
)
from cvarmarket.experiments import (
    HourlyClearing,
    SweepPoint,
    SweepResult,
    clear_horizon,
    clear_hour,
    clear_scenarios,
    run_case_sweep,
)
from cvarmarket.risk import RiskEstimate, cvar_alpha, estimate_risk, gaussian_cvar, var_alpha
from cvarmarket.scenario import (
    GaussianModel,
    NetLoadSamples,
    ScenarioFileError,
    ScenarioSet,
    load_scenarios_from_file,
    net_load_transform,
    sample_hour_scenarios,
    write_scenarios_to_file,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport",
    "AssumptionViolation",
    "Branch",
    "DispatchResult",
    "Fleet",
    "GaussianModel",
    "GeneratorSpec",
    "GridParams",
    "HourlyClearing",
    "InfeasibleError",
    "KKTResiduals",
    "NetLoadSamples",
    "PriceResult",
    "RiskEstimate",
    "ScenarioFileError",
    "ScenarioSet",
    "SweepPoint",
    "SweepResult",
    "check_assumptions",
    "clear_horizon",
    "clear_hour",
    "clear_scenarios",
    "clearing_price",
    "cvar_alpha",
    "dispatch",
    "estimate_risk",
    "expected_cost",
    "gaussian_cvar",
    "kkt_residuals",
    "load_scenarios_from_file",
    "net_load_transform",
    "run_case_sweep",
    "sample_hour_scenarios",
    "shortfall_diagnostic",
    "solve_total_power",
    "table_one_fleet",
    "var_alpha",
    "write_scenarios_to_file",
]
