"""Per-hour clearings, 24-hour horizons and the renewable-penetration sweeps.

Every sweep point reuses the same standard-normal draws (common random
numbers), so trends across a grid are not masked by sampling noise. Hours of
a horizon get independent sub-seeds derived from the master seed and the hour
index; neither depends on evaluation order, so results are identical with
any number of workers.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from cvarmarket.clearing import (
    AssumptionReport,
    AssumptionViolation,
    DispatchResult,
    Fleet,
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
from cvarmarket.risk import cvar_alpha
from cvarmarket.scenario import (
    GaussianModel,
    ScenarioSet,
    derive_seed,
    net_load_transform,
    sample_hour_scenarios,
)

HORIZON = 24

DEFAULT_SEED = 20240601
DEFAULT_SAMPLES = 200_000
DEFAULT_ALPHA = 0.9
DEFAULT_LOAD = GaussianModel(0.7, 0.1)
DEFAULT_RENEWABLE = GaussianModel(0.5, 0.1)
SWEEP_FLEET_SCALE = 1.5

CASE_I_MEANS = (0.0, 0.15, 0.25, 0.3, 0.45, 0.5, 0.65, 0.75, 0.8, 0.9)
CASE_II_STDS = (0.01, 0.04, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.45, 0.5)
CASE_III_MEANS = (0.05, 0.15, 0.25, 0.3, 0.45, 0.5, 0.65, 0.75, 0.8, 0.9)
CASE_III_STDS = (0.06, 0.1, 0.12, 0.15, 0.32, 0.2, 0.3, 0.4, 0.45, 0.5)
CASE_IV_R1 = (0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2, 0.22)

CASES = ("I", "II", "III", "IV", "Custom")


@dataclass(frozen=True, eq=False)
class HourlyClearing:
    hour: int
    cvar_s: float
    p_total: float | None
    dispatch: DispatchResult | None
    price: PriceResult | None
    shortfall: float | None
    cost: float | None
    feasible: bool
    assumption_report: AssumptionReport
    residuals: KKTResiduals | None = None
    message: str = ""

    @property
    def lam(self) -> float | None:
        return None if self.price is None else self.price.lam

    def __eq__(self, other) -> bool:
        if not isinstance(other, HourlyClearing):
            return NotImplemented
        return all(
            getattr(self, f.name) == getattr(other, f.name) for f in dataclasses.fields(self)
        )

    __hash__ = None


@dataclass(frozen=True)
class HourConfig:
    load: GaussianModel
    renewable: GaussianModel


def clear_scenarios(
    fleet: Fleet, grid: GridParams, scenarios: ScenarioSet, alpha: float, hour: int = 1
) -> HourlyClearing:
    """Clear one hour against a given set of (load, renewable) samples.

    Infeasibility never raises; it comes back as ``feasible=False`` with the
    reason in ``message``.
    """
    s = net_load_transform(scenarios, grid.r2)
    cvar_s = cvar_alpha(s.values, alpha)
    report = check_assumptions(fleet, grid, cvar_s)

    def infeasible(msg: str) -> HourlyClearing:
        return HourlyClearing(hour, cvar_s, None, None, None, None, None, False, report, message=msg)

    if not report.ok:
        return infeasible("; ".join(report.details))
    try:
        p_total = solve_total_power(cvar_s, grid.r1)
        result = dispatch(fleet, p_total)
        price = clearing_price(fleet, result, grid.r1, cvar_s)
    except (InfeasibleError, AssumptionViolation) as exc:
        return infeasible(str(exc))

    return HourlyClearing(
        hour=hour,
        cvar_s=cvar_s,
        p_total=p_total,
        dispatch=result,
        price=price,
        shortfall=shortfall_diagnostic(s, p_total, grid.r1, alpha),
        cost=expected_cost(fleet, result, float(np.mean(scenarios.p_r))),
        feasible=True,
        assumption_report=report,
        residuals=kkt_residuals(fleet, result, price, grid.r1, cvar_s),
    )


def clear_hour(
    fleet: Fleet,
    grid: GridParams,
    load_model: GaussianModel,
    renewable_model: GaussianModel,
    alpha: float,
    n_samples: int,
    seed: int,
    hour: int = 1,
) -> HourlyClearing:
    """Sample one hour and clear it."""
    scenarios = sample_hour_scenarios(load_model, renewable_model, n_samples, seed)
    return clear_scenarios(fleet, grid, scenarios, alpha, hour=hour)


def _ordered_map(fn: Callable[[Any], Any], items: Sequence[Any], workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def clear_horizon(
    hourly_configs: Sequence[HourConfig],
    fleet: Fleet,
    grid: GridParams,
    alpha: float,
    n_samples: int,
    master_seed: int,
    workers: int = 1,
    scenarios: ScenarioSet | None = None,
) -> list[HourlyClearing]:
    """Clear the 24 independent hours of a day-ahead horizon.

    Hour ``t`` (1-based) is sampled with ``derive_seed(master_seed, t)``. If
    ``scenarios`` is given it is used for every hour instead of sampling.
    """
    if len(hourly_configs) != HORIZON:
        raise ValueError(f"horizon needs exactly {HORIZON} hourly configs, got {len(hourly_configs)}")

    def run(t: int) -> HourlyClearing:
        if scenarios is not None:
            return clear_scenarios(fleet, grid, scenarios, alpha, hour=t)
        cfg = hourly_configs[t - 1]
        return clear_hour(fleet, grid, cfg.load, cfg.renewable, alpha, n_samples, derive_seed(master_seed, t), hour=t)

    return _ordered_map(run, list(range(1, HORIZON + 1)), workers)


def total_cost(clearings: Sequence[HourlyClearing]) -> float | None:
    """Sum of hourly costs, or None if any hour is infeasible."""
    if any(c.cost is None for c in clearings):
        return None
    return float(sum(c.cost for c in clearings))


@dataclass(frozen=True)
class SweepSettings:
    """Base configuration a sweep varies around."""

    fleet: Fleet = field(default_factory=table_one_fleet)
    fleet_scale: float = SWEEP_FLEET_SCALE
    r1: float = 0.04
    r2: float = 0.05
    alpha: float = DEFAULT_ALPHA
    load: GaussianModel = DEFAULT_LOAD
    renewable: GaussianModel = DEFAULT_RENEWABLE
    n_samples: int = DEFAULT_SAMPLES
    grid: dict | None = None  # custom sweep lists: {"mean": [...], "std": [...], "r1": [...]}

    @property
    def effective_fleet(self) -> Fleet:
        return self.fleet if self.fleet_scale == 1.0 else self.fleet.scaled(self.fleet_scale)

    def echo(self) -> dict:
        fleet = self.fleet
        return {
            "fleet": [{"pi": u.ask_price, "pmin": u.p_min, "pmax": u.p_max} for u in fleet.units],
            "renewable_price": fleet.renewable_price,
            "fleet_scale": self.fleet_scale,
            "r1": self.r1,
            "r2": self.r2,
            "alpha": self.alpha,
            "load": {"mean": self.load.mean, "std": self.load.std},
            "renewable": {"mean": self.renewable.mean, "std": self.renewable.std},
            "samples": self.n_samples,
        }


@dataclass(frozen=True)
class SweepPoint:
    index: int
    mean: float
    std: float
    r1: float
    clearing: HourlyClearing


@dataclass
class SweepResult:
    case_id: str
    points: list[SweepPoint]
    config_echo: dict

    @property
    def lambdas(self) -> list[float | None]:
        return [p.clearing.lam for p in self.points]


def case_grid(case_id: str, settings: SweepSettings) -> list[tuple[float, float, float]]:
    """(renewable mean, renewable std, r1) for every point of a case, in order."""
    mean, std, r1 = settings.renewable.mean, settings.renewable.std, settings.r1
    if case_id == "I":
        return [(m, 0.1, r1) for m in CASE_I_MEANS]
    if case_id == "II":
        return [(0.5, s, r1) for s in CASE_II_STDS]
    if case_id == "III":
        return [(m, s, r1) for m, s in zip(CASE_III_MEANS, CASE_III_STDS)]
    if case_id == "IV":
        return [(0.5, 0.1, r) for r in CASE_IV_R1]
    if case_id == "Custom":
        lists = {k: list(v) for k, v in (settings.grid or {}).items()}
        unknown = set(lists) - {"mean", "std", "r1"}
        if unknown:
            raise ValueError(f"unknown custom sweep keys: {sorted(unknown)}")
        lengths = {len(v) for v in lists.values()}
        if len(lengths) != 1 or 0 in lengths:
            raise ValueError("custom sweep needs one or more non-empty lists of equal length")
        n = lengths.pop()
        cols = [lists.get(k, [base] * n) for k, base in (("mean", mean), ("std", std), ("r1", r1))]
        return [tuple(float(v) for v in row) for row in zip(*cols)]
    raise ValueError(f"unknown case {case_id!r}; expected one of {CASES}")


def run_case_sweep(
    case_id: str,
    overrides: dict | None = None,
    master_seed: int = DEFAULT_SEED,
    workers: int = 1,
    scenarios: ScenarioSet | None = None,
) -> SweepResult:
    """Run one of the renewable-penetration sweeps.

    ``overrides`` replaces fields of :class:`SweepSettings`. All points share
    ``master_seed`` so they see the same underlying draws. A fixed
    ``scenarios`` set only makes sense when the renewable model is not swept.
    """
    settings = dataclasses.replace(SweepSettings(), **(overrides or {}))
    grid_values = case_grid(case_id, settings)
    fleet = settings.effective_fleet
    clip = settings.renewable.clip_at_zero
    if scenarios is not None and case_id in ("I", "II", "III"):
        raise ValueError(f"case {case_id} sweeps the renewable model; it cannot use a fixed scenario file")

    def run(item: tuple[int, tuple[float, float, float]]) -> SweepPoint:
        idx, (mean, std, r1) = item
        grid = GridParams(r1, settings.r2)
        if scenarios is not None:
            clearing = clear_scenarios(fleet, grid, scenarios, settings.alpha)
        else:
            renewable = GaussianModel(mean, std, clip)
            clearing = clear_hour(fleet, grid, settings.load, renewable, settings.alpha, settings.n_samples, master_seed)
        return SweepPoint(idx, mean, std, r1, clearing)

    points = _ordered_map(run, list(enumerate(grid_values)), workers)
    echo = settings.echo()
    echo.update(case=case_id, seed=master_seed, grid=[list(v) for v in grid_values])
    return SweepResult(case_id, points, echo)
