"""Joint load/renewable scenarios for a single hour and the net-load transform.

Samples are stored as two read-only numpy arrays. The default sampler draws
load and renewable output independently from (optionally zero-clipped)
Gaussians; dependent joint distributions come in through scenario CSV files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_HEADER = ("p_d", "p_r")


class ScenarioFileError(ValueError):
    """Raised when a scenario CSV cannot be parsed or fails validation."""


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GaussianModel:
    """Gaussian power model, per-unit. Clipped at zero by default."""

    mean: float
    std: float
    clip_at_zero: bool = True

    def __post_init__(self):
        if not math.isfinite(self.mean) or not math.isfinite(self.std):
            raise ValueError(f"model parameters must be finite, got mean={self.mean}, std={self.std}")
        if self.std < 0:
            raise ValueError(f"std must be >= 0, got {self.std}")

    def realize(self, z: np.ndarray) -> np.ndarray:
        """Map standard-normal draws ``z`` to samples of this model."""
        x = self.mean + self.std * z
        if self.clip_at_zero:
            x = np.maximum(x, 0.0)
        return x


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Joint (p_d, p_r) samples for one hour."""

    p_d: np.ndarray
    p_r: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        p_d = _readonly(self.p_d)
        p_r = _readonly(self.p_r)
        if p_d.ndim != 1 or p_d.shape != p_r.shape:
            raise ValueError("p_d and p_r must be 1-d arrays of equal length")
        if p_d.size < 1:
            raise ValueError("a scenario set needs at least one sample")
        object.__setattr__(self, "p_d", p_d)
        object.__setattr__(self, "p_r", p_r)

    @property
    def n_samples(self) -> int:
        return int(self.p_d.size)

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.p_d.tolist(), self.p_r.tolist()))

    def __len__(self) -> int:
        return self.n_samples

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScenarioSet):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.p_d, other.p_d)
            and np.array_equal(self.p_r, other.p_r)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class NetLoadSamples:
    """Net-load samples ``s = p_d + r2 * p_r**2 - p_r`` (may be negative)."""

    values: np.ndarray
    r2: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))

    def __len__(self) -> int:
        return int(self.values.size)


def derive_seed(master_seed: int, index: int) -> int:
    """Deterministic sub-seed for work item ``index`` of a run seeded by ``master_seed``."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def standard_draws(n_samples: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Two independent standard-normal streams (load, renewable) of length ``n_samples``."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, int(n_samples)))
    return z[0], z[1]


def sample_hour_scenarios(
    load_model: GaussianModel,
    renewable_model: GaussianModel,
    n_samples: int,
    seed: int,
) -> ScenarioSet:
    """Sample independent load and renewable outputs for one hour.

    The same ``seed`` always yields the same underlying standard-normal draws,
    so calls that differ only in the model parameters share common random
    numbers.
    """
    z_d, z_r = standard_draws(n_samples, seed)
    return ScenarioSet(load_model.realize(z_d), renewable_model.realize(z_r), seed=seed)


def load_scenarios_from_file(path) -> ScenarioSet:
    """Read a ``p_d,p_r`` CSV. Rows are kept in file order."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioFileError(f"{path}: no such scenario file")
    p_d: list[float] = []
    p_r: list[float] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ScenarioFileError(f"{path}: empty file")
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ScenarioFileError(f"{path}: row 1: expected header 'p_d,p_r', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ScenarioFileError(f"{path}: row {lineno}: expected 2 fields, got {len(row)}")
            try:
                d, r = float(row[0]), float(row[1])
            except ValueError:
                raise ScenarioFileError(f"{path}: row {lineno}: non-numeric field in {row!r}") from None
            if not (math.isfinite(d) and math.isfinite(r)):
                raise ScenarioFileError(f"{path}: row {lineno}: non-finite value in {row!r}")
            if d < 0 or r < 0:
                raise ScenarioFileError(f"{path}: row {lineno}: negative value in {row!r}")
            p_d.append(d)
            p_r.append(r)
    if not p_d:
        raise ScenarioFileError(f"{path}: no data rows")
    return ScenarioSet(np.array(p_d), np.array(p_r))


def write_scenarios_to_file(scenarios: ScenarioSet, path) -> None:
    # repr() round-trips floats exactly
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for d, r in zip(scenarios.p_d.tolist(), scenarios.p_r.tolist()):
            writer.writerow((repr(d), repr(r)))


def net_load_transform(scenarios: ScenarioSet, r2: float) -> NetLoadSamples:
    """Net load seen by the non-renewable fleet after renewable line losses."""
    if r2 < 0:
        raise ValueError(f"r2 must be >= 0, got {r2}")
    p_d, p_r = scenarios.p_d, scenarios.p_r
    return NetLoadSamples(p_d + r2 * p_r**2 - p_r, r2=float(r2))
