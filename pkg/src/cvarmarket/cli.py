"""Command-line front end.

Subcommands::

    cvarmarket clear    --config cfg.json [--scenarios s.csv] [--out clear.csv]
    cvarmarket horizon  --config cfg.json [--out horizon.csv]
    cvarmarket sweep    --case I|II|III|IV | --grid custom [--out caseI.csv]
    cvarmarket validate --config cfg.json

Each run writes a CSV plus a ``.json`` sidecar next to it holding the fully
resolved configuration and a short summary.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

from cvarmarket import __version__
from cvarmarket.clearing import TABLE_ONE_PMAX, TABLE_ONE_PRICES, Fleet, GeneratorSpec, GridParams
from cvarmarket.experiments import (
    DEFAULT_ALPHA,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    HORIZON,
    SWEEP_FLEET_SCALE,
    HourConfig,
    HourlyClearing,
    SweepResult,
    clear_horizon,
    clear_hour,
    clear_scenarios,
    run_case_sweep,
    total_cost,
)
from cvarmarket.scenario import GaussianModel, ScenarioFileError, load_scenarios_from_file

SWEEP_COLUMNS = (
    "case",
    "point_index",
    "sweep_mean",
    "sweep_std",
    "sweep_r1",
    "cvar_s",
    "p_total",
    "marginal_index",
    "branch",
    "lambda",
    "shortfall_diag",
    "cost",
    "feasible",
)
HOURLY_COLUMNS = ("hour", "cvar_s", "p_total", "lambda", "cost", "feasible")

CONFIG_KEYS = frozenset(
    {"fleet", "renewable_price", "r1", "r2", "alpha", "load", "renewable", "samples", "seed", "fleet_scale", "hours", "sweep"}
)


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


def fmt(x) -> str:
    """17 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return f"{x:.17g}"


@dataclass(frozen=True)
class ModelConfig:
    mean: float
    std: float

    def model(self) -> GaussianModel:
        return GaussianModel(self.mean, self.std)


@dataclass(frozen=True)
class UnitConfig:
    pi: float
    pmin: float
    pmax: float


def _default_fleet() -> tuple[UnitConfig, ...]:
    return tuple(UnitConfig(pi, 0.0, pmax) for pi, pmax in zip(TABLE_ONE_PRICES, TABLE_ONE_PMAX))


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs, as read from JSON plus command-line flags."""

    fleet: tuple[UnitConfig, ...] = field(default_factory=_default_fleet)
    renewable_price: float = 10.0
    r1: float = 0.04
    r2: float = 0.05
    alpha: float = DEFAULT_ALPHA
    load: ModelConfig = ModelConfig(0.7, 0.1)
    renewable: ModelConfig = ModelConfig(0.5, 0.1)
    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    fleet_scale: float | None = None
    hours: tuple[tuple[ModelConfig, ModelConfig], ...] | None = None
    sweep: dict | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        kw = {}
        if "fleet" in data:
            kw["fleet"] = _parse_fleet(data["fleet"])
        for key in ("renewable_price", "r1", "r2", "alpha", "fleet_scale"):
            if key in data and not (key == "fleet_scale" and data[key] is None):
                kw[key] = _number(data[key], key)
        for key in ("samples", "seed"):
            if key in data:
                kw[key] = _integer(data[key], key)
        for key in ("load", "renewable"):
            if key in data:
                kw[key] = _parse_model(data[key], key)
        if data.get("hours") is not None:
            hours = data["hours"]
            if not isinstance(hours, list) or len(hours) != HORIZON:
                raise ConfigError(f"config field 'hours': expected a list of {HORIZON} entries")
            parsed = []
            for i, h in enumerate(hours):
                if not isinstance(h, dict):
                    raise ConfigError(f"config field 'hours[{i}]': expected an object")
                parsed.append((_parse_model(h.get("load"), f"hours[{i}].load"), _parse_model(h.get("renewable"), f"hours[{i}].renewable")))
            kw["hours"] = tuple(parsed)
        if data.get("sweep") is not None:
            kw["sweep"] = _parse_sweep(data["sweep"])
        cfg = cls(**kw)
        cfg.check()
        return cfg

    def to_dict(self) -> dict:
        out = {
            "fleet": [asdict(u) for u in self.fleet],
            "renewable_price": self.renewable_price,
            "r1": self.r1,
            "r2": self.r2,
            "alpha": self.alpha,
            "load": asdict(self.load),
            "renewable": asdict(self.renewable),
            "samples": self.samples,
            "seed": self.seed,
            "fleet_scale": self.fleet_scale,
        }
        if self.hours is not None:
            out["hours"] = [{"load": asdict(d), "renewable": asdict(r)} for d, r in self.hours]
        if self.sweep is not None:
            out["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        return out

    def check(self) -> None:
        """Build every domain object once so invalid values fail before any work starts."""
        _field("fleet", self.base_fleet)
        _field("r1", lambda: GridParams(self.r1, 0.0))
        _field("r2", lambda: GridParams(0.0, self.r2))
        if not 0 < self.alpha < 1:
            raise ConfigError(f"config field 'alpha': must lie in (0, 1), got {self.alpha}")
        if self.samples < 1:
            raise ConfigError(f"config field 'samples': must be >= 1, got {self.samples}")
        if self.fleet_scale is not None and not self.fleet_scale > 0:
            raise ConfigError(f"config field 'fleet_scale': must be > 0, got {self.fleet_scale}")
        _field("load", self.load.model)
        _field("renewable", self.renewable.model)
        for i, (d, r) in enumerate(self.hours or ()):
            _field(f"hours[{i}]", lambda: (d.model(), r.model()))

    def base_fleet(self) -> Fleet:
        try:
            units = tuple(GeneratorSpec(u.pi, u.pmin, u.pmax) for u in self.fleet)
            return Fleet(units, self.renewable_price)
        except ValueError as exc:
            if "renewable price" in str(exc):
                raise ConfigError(f"config field 'renewable_price': {exc}") from None
            raise

    def fleet_for(self, command: str) -> Fleet:
        fleet, scale = self.base_fleet(), self.scale_for(command)
        return fleet if scale == 1.0 else fleet.scaled(scale)

    def scale_for(self, command: str) -> float:
        if self.fleet_scale is not None:
            return self.fleet_scale
        return SWEEP_FLEET_SCALE if command == "sweep" else 1.0

    @property
    def grid(self) -> GridParams:
        return GridParams(self.r1, self.r2)


def _field(name: str, build) -> None:
    try:
        build()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"config field '{name}': {exc}") from None


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config field '{name}': expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"config field '{name}': must be finite")
    return value


def _integer(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"config field '{name}': expected an integer, got {value!r}")
    return value


def _parse_model(value, name: str) -> ModelConfig:
    if not isinstance(value, dict) or set(value) != {"mean", "std"}:
        raise ConfigError(f"config field '{name}': expected an object with keys 'mean' and 'std'")
    return ModelConfig(_number(value["mean"], f"{name}.mean"), _number(value["std"], f"{name}.std"))


def _parse_fleet(value) -> tuple[UnitConfig, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError("config field 'fleet': expected a non-empty list of {pi, pmin, pmax}")
    units = []
    for i, u in enumerate(value):
        if not isinstance(u, dict) or set(u) != {"pi", "pmin", "pmax"}:
            raise ConfigError(f"config field 'fleet[{i}]': expected an object with keys pi, pmin, pmax")
        units.append(UnitConfig(*(_number(u[k], f"fleet[{i}].{k}") for k in ("pi", "pmin", "pmax"))))
    return tuple(units)


def _parse_sweep(value) -> dict:
    if not isinstance(value, dict) or not value or set(value) - {"mean", "std", "r1"}:
        raise ConfigError("config field 'sweep': expected an object with lists under 'mean', 'std' and/or 'r1'")
    out = {}
    for key, seq in value.items():
        if not isinstance(seq, list) or not seq:
            raise ConfigError(f"config field 'sweep.{key}': expected a non-empty list")
        out[key] = tuple(_number(v, f"sweep.{key}[{i}]") for i, v in enumerate(seq))
    if len({len(v) for v in out.values()}) != 1:
        raise ConfigError("config field 'sweep': lists must have equal length")
    return out


def load_config(path: str | None, args: argparse.Namespace) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON ({exc})") from None
    cfg = RunConfig.from_dict(data)
    flags = {}
    if args.seed is not None:
        flags["seed"] = args.seed
    if args.samples is not None:
        flags["samples"] = args.samples
    if args.fleet_scale is not None:
        flags["fleet_scale"] = args.fleet_scale
    cfg = replace(cfg, **flags)
    cfg.check()
    return cfg


def _hourly_row(c: HourlyClearing, n_units: int) -> list[str]:
    outputs = c.dispatch.outputs.tolist() if c.dispatch is not None else [None] * n_units
    return [fmt(c.hour), fmt(c.cvar_s), fmt(c.p_total), fmt(c.lam), fmt(c.cost), fmt(c.feasible)] + [fmt(p) for p in outputs]


def write_hourly_csv(path: Path, clearings: Sequence[HourlyClearing], n_units: int) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(HOURLY_COLUMNS) + [f"p_{i}" for i in range(1, n_units + 1)])
        for c in clearings:
            writer.writerow(_hourly_row(c, n_units))


def write_sweep_csv(path: Path, result: SweepResult) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for p in result.points:
            c = p.clearing
            d = c.dispatch
            writer.writerow(
                [
                    result.case_id,
                    fmt(p.index),
                    fmt(p.mean),
                    fmt(p.std),
                    fmt(p.r1),
                    fmt(c.cvar_s),
                    fmt(c.p_total),
                    fmt(d.marginal_index if d is not None else None),
                    d.branch.value if d is not None else "",
                    fmt(c.lam),
                    fmt(c.shortfall),
                    fmt(c.cost),
                    fmt(c.feasible),
                ]
            )


def write_sidecar(out: Path, command: str, cfg: RunConfig, summary: dict, extra: dict | None = None) -> Path:
    meta = {"version": __version__, "command": command, "config": cfg.to_dict(), "summary": summary}
    meta.update(extra or {})
    path = out.with_suffix(".json")
    path.write_text(json.dumps(meta, indent=2) + "\n")
    return path


def _summarize(c: HourlyClearing) -> str:
    if not c.feasible:
        return f"hour {c.hour}: feasible=false cvar_s={c.cvar_s:.6g} ({c.message})"
    d = c.dispatch
    return (
        f"hour {c.hour}: feasible=true lambda={c.lam:.6g} p_total={c.p_total:.6g} "
        f"cvar_s={c.cvar_s:.6g} k={d.marginal_index} branch={d.branch.value} "
        f"cost={c.cost:.6g} shortfall_diag={c.shortfall:.3g}"
    )


def _hour_meta(c: HourlyClearing) -> dict:
    return {"hour": c.hour, "feasible": c.feasible, "lambda": c.lam, "p_total": c.p_total, "cvar_s": c.cvar_s, "message": c.message}


def cmd_clear(args, cfg: RunConfig) -> int:
    fleet = cfg.fleet_for("clear")
    if args.scenarios:
        c = clear_scenarios(fleet, cfg.grid, load_scenarios_from_file(args.scenarios), cfg.alpha)
    else:
        c = clear_hour(fleet, cfg.grid, cfg.load.model(), cfg.renewable.model(), cfg.alpha, cfg.samples, cfg.seed)
    out = Path(args.out or "clear.csv")
    write_hourly_csv(out, [c], len(fleet))
    write_sidecar(out, "clear", cfg, _hour_meta(c), {"fleet_scale_used": cfg.scale_for("clear"), "scenarios": args.scenarios})
    print(_summarize(c))
    return 0


def cmd_horizon(args, cfg: RunConfig) -> int:
    fleet = cfg.fleet_for("horizon")
    hours = cfg.hours or tuple((cfg.load, cfg.renewable) for _ in range(HORIZON))
    configs = [HourConfig(d.model(), r.model()) for d, r in hours]
    scenarios = load_scenarios_from_file(args.scenarios) if args.scenarios else None
    clearings = clear_horizon(configs, fleet, cfg.grid, cfg.alpha, cfg.samples, cfg.seed, workers=args.workers, scenarios=scenarios)
    out = Path(args.out or "horizon.csv")
    write_hourly_csv(out, clearings, len(fleet))
    cost = total_cost(clearings)
    n_ok = sum(c.feasible for c in clearings)
    write_sidecar(
        out,
        "horizon",
        cfg,
        {"feasible_hours": n_ok, "total_cost": cost, "hours": [_hour_meta(c) for c in clearings]},
        {"fleet_scale_used": cfg.scale_for("horizon"), "scenarios": args.scenarios},
    )
    for c in clearings:
        print(_summarize(c))
    print(f"feasible hours: {n_ok}/{HORIZON}; total cost: {'n/a' if cost is None else f'{cost:.6g}'}")
    return 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    case_id = "Custom" if args.grid else args.case
    if case_id == "Custom" and cfg.sweep is None:
        raise ConfigError("config field 'sweep': required for --grid custom")
    scale = cfg.scale_for("sweep")
    overrides = dict(
        fleet=cfg.base_fleet(),
        fleet_scale=scale,
        r1=cfg.r1,
        r2=cfg.r2,
        alpha=cfg.alpha,
        load=cfg.load.model(),
        renewable=cfg.renewable.model(),
        n_samples=cfg.samples,
        grid=dict(cfg.sweep) if cfg.sweep else None,
    )
    scenarios = load_scenarios_from_file(args.scenarios) if args.scenarios else None
    result = run_case_sweep(case_id, overrides, master_seed=cfg.seed, workers=args.workers, scenarios=scenarios)
    out = Path(args.out or f"case{case_id}.csv")
    write_sweep_csv(out, result)
    write_sidecar(
        out,
        "sweep",
        cfg,
        {"case": case_id, "points": len(result.points), "feasible_points": sum(p.clearing.feasible for p in result.points)},
        {"fleet_scale_used": scale, "scenarios": args.scenarios, "config_echo": result.config_echo},
    )
    print(f"case {case_id}: {len(result.points)} points -> {out}")
    for p in result.points:
        c = p.clearing
        lam = "infeasible" if c.lam is None else f"lambda={c.lam:.6g}"
        print(f"  [{p.index}] mean={p.mean:g} std={p.std:g} r1={p.r1:g} cvar_s={c.cvar_s:.6g} {lam}")
    return 0


def cmd_validate(args, cfg: RunConfig) -> int:
    for command in ("clear", "sweep"):
        cfg.fleet_for(command)
    if args.scenarios:
        s = load_scenarios_from_file(args.scenarios)
        print(f"scenarios OK: {s.n_samples} rows")
    print("config OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvarmarket", description="Day-ahead market clearing under a CVaR reliability constraint")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--fleet-scale", type=float, dest="fleet_scale")
        p.add_argument("--scenarios", help="p_d,p_r CSV used instead of the Gaussian samplers")
        p.add_argument("--out", help="output CSV path")
        p.add_argument("--workers", type=int, default=1, help="parallel workers (results do not depend on it)")
        return p

    common(sub.add_parser("clear", help="clear a single hour"))
    common(sub.add_parser("horizon", help="clear 24 independent hours"))
    sweep = common(sub.add_parser("sweep", help="run a renewable-penetration sweep"))
    which = sweep.add_mutually_exclusive_group(required=True)
    which.add_argument("--case", choices=("I", "II", "III", "IV"))
    which.add_argument("--grid", choices=("custom",), help="sweep the lists under the config's 'sweep' key")
    common(sub.add_parser("validate", help="check a configuration without running"))
    return parser


COMMANDS = {"clear": cmd_clear, "horizon": cmd_horizon, "sweep": cmd_sweep, "validate": cmd_validate}


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config, args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ScenarioFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
