"""Single-hour ISO problem: committed power, merit-order dispatch and clearing price.

The reliability constraint requires the planned non-renewable output ``P`` to
cover the CVaR of the net load plus the loss on the non-renewable line,

    r1 * P**2 - P + cvar_s = 0,

and the clearing price is the shadow price of that constraint,

    lambda = pi_m / sqrt(1 - 4 * r1 * cvar_s),

where ``m`` is the unit left strictly inside its output limits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from cvarmarket.risk import cvar_alpha
from cvarmarket.scenario import NetLoadSamples

FEAS_TOL = 1e-9
KKT_TOL = 1e-9
ROOT_TOL = 1e-12

TABLE_ONE_PMAX = (0.05, 0.1, 0.12, 0.15, 0.18, 0.25)
TABLE_ONE_PRICES = (20.0, 30.0, 40.0, 50.0, 60.0, 70.0)


class InfeasibleError(ValueError):
    """The hour cannot be cleared: negative discriminant or demand outside fleet limits."""

    def __init__(self, message: str, discriminant: float | None = None):
        super().__init__(message)
        self.discriminant = discriminant


class AssumptionViolation(ValueError):
    """Dispatch needs the min-clamped branch but unit limits do not allow it."""


class ConsistencyError(RuntimeError):
    """A recovered multiplier came out negative: dispatch and price disagree."""


class Branch(str, enum.Enum):
    INTERIOR = "Interior"
    MIN_CLAMPED = "MinClamped"


@dataclass(frozen=True)
class GeneratorSpec:
    ask_price: float
    p_min: float
    p_max: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.ask_price, self.p_min, self.p_max)):
            raise ValueError(f"generator parameters must be finite: {self}")
        if self.ask_price <= 0:
            raise ValueError(f"ask_price must be > 0, got {self.ask_price}")
        if not 0 <= self.p_min <= self.p_max:
            raise ValueError(f"need 0 <= p_min <= p_max, got p_min={self.p_min}, p_max={self.p_max}")


@dataclass(frozen=True)
class Fleet:
    """Merit-ordered non-renewable units plus the renewable asking price."""

    units: tuple[GeneratorSpec, ...]
    renewable_price: float

    def __post_init__(self):
        units = tuple(self.units)
        object.__setattr__(self, "units", units)
        if not units:
            raise ValueError("fleet needs at least one unit")
        prices = [u.ask_price for u in units]
        if any(b <= a for a, b in zip(prices, prices[1:])):
            raise ValueError(f"ask prices must be strictly increasing, got {prices}")
        if not 0 < self.renewable_price < prices[0]:
            raise ValueError(
                f"renewable price must satisfy 0 < pi_r < pi_1 = {prices[0]}, got {self.renewable_price}"
            )

    @classmethod
    def from_arrays(cls, prices, p_min, p_max, renewable_price: float) -> "Fleet":
        units = tuple(GeneratorSpec(float(a), float(lo), float(hi)) for a, lo, hi in zip(prices, p_min, p_max))
        return cls(units, float(renewable_price))

    def __len__(self) -> int:
        return len(self.units)

    @property
    def prices(self) -> np.ndarray:
        return np.array([u.ask_price for u in self.units])

    @property
    def p_min(self) -> np.ndarray:
        return np.array([u.p_min for u in self.units])

    @property
    def p_max(self) -> np.ndarray:
        return np.array([u.p_max for u in self.units])

    @property
    def capacity(self) -> float:
        return float(self.p_max.sum())

    def scaled(self, factor: float) -> "Fleet":
        """Copy with every ``p_max`` multiplied by ``factor``; prices and ``p_min`` unchanged."""
        if not factor > 0:
            raise ValueError(f"fleet scale must be > 0, got {factor}")
        return Fleet(
            tuple(GeneratorSpec(u.ask_price, u.p_min, u.p_max * factor) for u in self.units),
            self.renewable_price,
        )


def table_one_fleet(scale: float = 1.0, renewable_price: float = 10.0) -> Fleet:
    """Six-unit reference fleet, ``p_min = 0`` throughout."""
    fleet = Fleet.from_arrays(TABLE_ONE_PRICES, [0.0] * 6, TABLE_ONE_PMAX, renewable_price)
    return fleet if scale == 1.0 else fleet.scaled(scale)


@dataclass(frozen=True)
class GridParams:
    r1: float = 0.0
    r2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.r1) and math.isfinite(self.r2)):
            raise ValueError("resistances must be finite")
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError(f"resistances must be >= 0, got r1={self.r1}, r2={self.r2}")


@dataclass(frozen=True)
class AssumptionReport:
    a1a_ok: bool
    a1b_ok: bool
    a2_ok: bool
    details: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.a1a_ok and self.a1b_ok and self.a2_ok


@dataclass(frozen=True, eq=False)
class DispatchResult:
    outputs: np.ndarray
    total: float
    marginal_index: int  # 1-based
    branch: Branch

    def __post_init__(self):
        out = np.array(self.outputs, dtype=float)
        out.setflags(write=False)
        object.__setattr__(self, "outputs", out)

    @property
    def price_setter(self) -> int:
        """1-based index of the unit whose ask sets the clearing price."""
        return self.marginal_index if self.branch is Branch.INTERIOR else self.marginal_index - 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, DispatchResult):
            return NotImplemented
        return (
            np.array_equal(self.outputs, other.outputs)
            and self.total == other.total
            and self.marginal_index == other.marginal_index
            and self.branch == other.branch
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PriceResult:
    lam: float
    mu: np.ndarray
    mu_tilde: np.ndarray

    def __post_init__(self):
        for name in ("mu", "mu_tilde"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PriceResult):
            return NotImplemented
        return (
            self.lam == other.lam
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.mu_tilde, other.mu_tilde)
        )

    __hash__ = None


@dataclass(frozen=True)
class KKTResiduals:
    stationarity: float
    balance: float
    bound_violation: float
    complementarity: float
    sign_violation: float
    per_unit_stationarity: tuple[float, ...] = field(default=(), repr=False)

    def ok(self, tol: float = KKT_TOL, balance_tol: float = ROOT_TOL) -> bool:
        return (
            self.stationarity <= tol
            and self.complementarity <= tol
            and self.sign_violation <= tol
            and self.bound_violation <= FEAS_TOL
            and abs(self.balance) <= balance_tol
        )


def _discriminant(r1: float, cvar_s: float) -> float:
    return 1.0 - 4.0 * r1 * cvar_s


def _a2_holds(fleet: Fleet) -> bool:
    gap = float(np.min(fleet.p_max - fleet.p_min))
    return bool(np.all(fleet.p_min < gap))


def check_assumptions(fleet: Fleet, grid: GridParams, cvar_s: float) -> AssumptionReport:
    """Feasibility report for one hour. Never raises for finite inputs."""
    details = []
    disc = _discriminant(grid.r1, cvar_s)
    a1a = disc >= 0
    if not a1a:
        details.append(f"1 - 4*r1*cvar_s = {disc:.6g} < 0: no real total power")

    lo, hi = float(fleet.p_min.min()), fleet.capacity
    if a1a:
        p_total = solve_total_power(cvar_s, grid.r1)
        a1b = lo - FEAS_TOL <= p_total <= hi + FEAS_TOL
        if grid.r1 == 0:
            a1b = a1b and lo - FEAS_TOL <= cvar_s <= hi + FEAS_TOL
        if not a1b:
            details.append(f"required power {p_total:.6g} outside fleet window [{lo:.6g}, {hi:.6g}]")
    else:
        a1b = False

    a2 = _a2_holds(fleet)
    if not a2:
        gap = float(np.min(fleet.p_max - fleet.p_min))
        details.append(f"some p_min >= smallest unit range {gap:.6g}")
    return AssumptionReport(bool(a1a), bool(a1b), bool(a2), tuple(details))


def solve_total_power(cvar_s: float, r1: float) -> float:
    """Smaller root of ``r1 * p**2 - p + cvar_s = 0`` (``cvar_s`` itself when ``r1 == 0``)."""
    if r1 < 0:
        raise ValueError(f"r1 must be >= 0, got {r1}")
    disc = _discriminant(r1, cvar_s)
    if disc < 0:
        raise InfeasibleError(f"negative discriminant 1 - 4*r1*cvar_s = {disc:.6g}", discriminant=disc)
    # (1 - sqrt(disc)) / (2 r1) rewritten without cancellation; reduces to cvar_s at r1 = 0
    return 2.0 * cvar_s / (1.0 + math.sqrt(disc))


def dispatch(fleet: Fleet, p_total: float) -> DispatchResult:
    """Merit-order dispatch of ``p_total`` across the fleet.

    Units below the marginal index ``k`` run at ``p_max`` and units above it
    are off. If the residual left for unit ``k`` is below its ``p_min``, unit
    ``k`` is clamped at ``p_min`` and unit ``k - 1`` backs off to compensate.
    """
    p_min, p_max = fleet.p_min, fleet.p_max
    n = len(fleet)
    cum = np.concatenate(([0.0], np.cumsum(p_max)))
    lo, hi = float(p_min.min()), float(cum[-1])
    if not lo - FEAS_TOL <= p_total <= hi + FEAS_TOL:
        raise InfeasibleError(f"total power {p_total:.6g} outside fleet window [{lo:.6g}, {hi:.6g}]")

    # smallest k with p_total <= cum[k]; ties go to the cheaper unit
    k = int(np.searchsorted(cum[1:] + FEAS_TOL, p_total, side="left")) + 1
    k = min(max(k, 1), n)
    outputs = np.zeros(n)
    outputs[: k - 1] = p_max[: k - 1]
    rem = p_total - cum[k - 1]

    if rem >= p_min[k - 1] - FEAS_TOL:
        outputs[k - 1] = rem
        return DispatchResult(outputs, float(p_total), k, Branch.INTERIOR)

    if k == 1:
        raise InfeasibleError(f"total power {p_total:.6g} below p_min of the only committable unit")
    if not _a2_holds(fleet):
        raise AssumptionViolation(
            f"unit {k} needs clamping at p_min={p_min[k - 1]:.6g} but p_min values are not below every unit range"
        )
    back_off = p_total - cum[k - 2] - p_min[k - 1]
    if not p_min[k - 2] < back_off < p_max[k - 2]:
        raise AssumptionViolation(
            f"unit {k - 1} cannot absorb the clamp: output {back_off:.6g} not inside "
            f"({p_min[k - 2]:.6g}, {p_max[k - 2]:.6g})"
        )
    outputs[k - 2] = back_off
    outputs[k - 1] = p_min[k - 1]
    return DispatchResult(outputs, float(p_total), k, Branch.MIN_CLAMPED)


def clearing_price(fleet: Fleet, result: DispatchResult, r1: float, cvar_s: float) -> PriceResult:
    """Clearing price and bound multipliers recovered from stationarity."""
    disc = _discriminant(r1, cvar_s)
    if disc < 0:
        raise InfeasibleError(f"negative discriminant 1 - 4*r1*cvar_s = {disc:.6g}", discriminant=disc)
    prices = fleet.prices
    k = result.marginal_index
    m = result.price_setter
    lam = float(prices[m - 1] / math.sqrt(disc))
    # marginal value of one unit of output net of line loss
    net = lam * (1.0 - 2.0 * r1 * result.total)

    n = len(fleet)
    mu = np.zeros(n)
    mu_tilde = np.zeros(n)
    mu[: m - 1] = net - prices[: m - 1]
    if result.branch is Branch.MIN_CLAMPED:
        mu_tilde[k - 1] = prices[k - 1] - net
    worst = min(float(mu.min()), float(mu_tilde.min()))
    if worst < -KKT_TOL:
        raise ConsistencyError(f"negative multiplier {worst:.3g}: dispatch does not match (r1, cvar_s)")
    return PriceResult(lam, np.maximum(mu, 0.0), np.maximum(mu_tilde, 0.0))


def kkt_residuals(
    fleet: Fleet, result: DispatchResult, price: PriceResult, r1: float, cvar_s: float
) -> KKTResiduals:
    """Residuals of the first-order conditions at a dispatch/price pair.

    Stationarity is checked for dispatched units (``p_i > 0``) and bound
    feasibility for committed units (index up to the marginal one).
    """
    p = result.outputs
    p_min, p_max, prices = fleet.p_min, fleet.p_max, fleet.prices
    total = float(p.sum())
    lam = price.lam

    stat = prices + 2.0 * lam * r1 * total - lam + price.mu - price.mu_tilde
    active = p > 0
    stationarity = float(np.max(np.abs(stat[active]))) if active.any() else 0.0

    balance = r1 * total**2 + cvar_s - total

    committed = np.arange(len(fleet)) < result.marginal_index
    viol = np.maximum(np.maximum(p_min - p, p - p_max), 0.0)
    bound_violation = float(viol[committed].max()) if committed.any() else 0.0

    slack = np.concatenate((np.abs(price.mu * (p - p_max)), np.abs(price.mu_tilde * (p_min - p))))
    complementarity = float(slack.max())
    sign_violation = float(max(0.0, -price.mu.min(), -price.mu_tilde.min()))
    return KKTResiduals(
        stationarity=stationarity,
        balance=float(balance),
        bound_violation=bound_violation,
        complementarity=complementarity,
        sign_violation=sign_violation,
        per_unit_stationarity=tuple(np.where(active, np.abs(stat), 0.0).tolist()),
    )


def shortfall_diagnostic(s_samples, p_total: float, r1: float, alpha: float) -> float:
    """CVaR of the unmet demand ``(r1*P**2 + s - P)^+`` evaluated directly on samples."""
    s = s_samples.values if isinstance(s_samples, NetLoadSamples) else np.asarray(s_samples, dtype=float)
    if s.size == 0:
        raise ValueError("need at least one net-load sample")
    shortfall = np.maximum(r1 * p_total**2 + s - p_total, 0.0)
    return cvar_alpha(shortfall, alpha)


def expected_cost(fleet: Fleet, result: DispatchResult, mean_renewable: float) -> float:
    """Expected energy cost of the hour: ``sum(pi_i * p_i) + pi_r * E[p_r]``."""
    if mean_renewable < 0:
        raise ValueError(f"mean renewable output must be >= 0, got {mean_renewable}")
    return float(fleet.prices @ result.outputs + fleet.renewable_price * mean_renewable)

