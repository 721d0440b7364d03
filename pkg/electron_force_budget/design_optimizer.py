"""Derivative-free search over design parameters against budget objectives.

Latin-hypercube seeding picks starting points, then bounded Nelder-Mead
restarts refine the best of them in unit-cube coordinates.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import optimize as sp_optimize
from scipy.stats import qmc

from .budget_engine import DEFAULT_F_HI, DEFAULT_F_LO, assemble_budget, find_minimum, resonance_grid
from .core_physics import derive_modes
from .errors import ConfigError, NoFeasiblePoint, NumericalError, PhysicsError, RefusesGrid
from .models import TWO_PI, SystemConfig
from .settings import get_settings

logger = logging.getLogger(__name__)

ObjectiveFn = Callable[[SystemConfig], float]

DETUNING = "detuning"
LOG_SCALED = ("cavity.Q_int", "cavity.Q_ext", "antenna.width_w")
N_RESTARTS = 3
SIMPLEX_XATOL = 1e-4
MIN_EVALS = 20
OBJECTIVE_POINTS = 1024


@dataclass(frozen=True)
class ParamSpec:
    """One design axis. ``name`` is a dotted config path or ``detuning``
    (f_k − f_z in Hz). A zero-width axis pins the parameter."""

    name: str
    lower: float
    upper: float
    scale: str = "linear"

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ConfigError("bounds must be finite", self.name)
        if self.lower > self.upper:
            raise ConfigError("lower bound exceeds upper bound", self.name)
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"unknown scale {self.scale!r}", self.name)
        if self.scale == "log" and self.lower <= 0:
            raise ConfigError("log-scaled axis needs a positive lower bound", self.name)

    @classmethod
    def parse(cls, text: str) -> "ParamSpec":
        """Parse ``name:lo:hi[:log|linear]``; Q factors and widths default to log."""
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"expected name:lo:hi[:scale], got {text!r}", "param")
        name = parts[0]
        try:
            lower, upper = float(parts[1]), float(parts[2])
        except ValueError:
            raise ConfigError(f"bounds are not numbers in {text!r}", name)
        if len(parts) == 4:
            scale = parts[3]
        else:
            scale = "log" if name in LOG_SCALED and lower > 0 else "linear"
        return cls(name, lower, upper, scale)

    def from_unit(self, u: float) -> float:
        if u <= 0.0:
            return self.lower
        if u >= 1.0:
            return self.upper
        if self.scale == "log":
            value = math.exp(math.log(self.lower) + u * (math.log(self.upper) - math.log(self.lower)))
        else:
            value = self.lower + u * (self.upper - self.lower)
        # rounding may step past a bound
        return min(max(value, self.lower), self.upper)

    def to_unit(self, value: float) -> float:
        if self.upper == self.lower:
            return 0.0
        if self.scale == "log":
            return (math.log(value) - math.log(self.lower)) / (math.log(self.upper) - math.log(self.lower))
        return (value - self.lower) / (self.upper - self.lower)


@dataclass(frozen=True)
class ParamSpace:
    entries: Tuple[ParamSpec, ...]

    def __post_init__(self):
        if not self.entries:
            raise ConfigError("parameter space is empty", "param")
        names = [entry.name for entry in self.entries]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate parameter", "param")

    @classmethod
    def from_strings(cls, texts: Sequence[str]) -> "ParamSpace":
        return cls(tuple(ParamSpec.parse(text) for text in texts))

    @property
    def names(self) -> List[str]:
        return [entry.name for entry in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def validate_against(self, config: SystemConfig):
        for entry in self.entries:
            if entry.name != DETUNING:
                config.get(entry.name)

    def apply(self, config: SystemConfig, values: Dict[str, float]) -> SystemConfig:
        """Config with every named value set; detuning is applied last, against the new f_z."""
        for name, value in values.items():
            if name != DETUNING:
                config = config.replace(name, value)
        if DETUNING in values:
            f_z = derive_modes(config.trap).omega_z / TWO_PI
            config = config.replace("cavity.f_k_hz", f_z + values[DETUNING])
        return config

    def values_at(self, u: Sequence[float]) -> Dict[str, float]:
        return {entry.name: entry.from_unit(x) for entry, x in zip(self.entries, u)}


@dataclass
class OptResult:
    best_config: SystemConfig
    best_objective: float
    best_params: Dict[str, float]
    trace: np.ndarray
    evaluations: int
    objective: str = "custom"

    @property
    def running_min(self) -> np.ndarray:
        return np.minimum.accumulate(self.trace[:, 1])

    def to_dict(self) -> Dict:
        return {
            "objective": self.objective,
            "best_objective": self.best_objective,
            "best_params": self.best_params,
            "evaluations": self.evaluations,
            "trace": [[int(i), float(v)] for i, v in self.trace],
        }


def _min_floor(config: SystemConfig, points: int) -> float:
    budget = assemble_budget(config, resonance_grid(config, n=points))
    return find_minimum(budget)[1]


def _band_min(config: SystemConfig, points: int, band: Tuple[float, float]) -> float:
    f_lo, f_hi = band
    grid = resonance_grid(config, n=points, f_lo=min(f_lo, DEFAULT_F_LO), f_hi=max(f_hi, DEFAULT_F_HI))
    budget = assemble_budget(config, grid)
    mask = (grid.points >= f_lo) & (grid.points <= f_hi)
    if not np.any(mask):
        raise RefusesGrid(f"no grid points inside band [{f_lo:.6g}, {f_hi:.6g}] Hz")
    return float(np.min(budget.amplitude()[mask]))


OBJECTIVES = {"min_floor": _min_floor, "band_min": _band_min}


def budget_objective(name: str = "min_floor", band: Optional[Tuple[float, float]] = None, points: int = OBJECTIVE_POINTS) -> ObjectiveFn:
    """Named objective: ``min_floor`` (deepest minimum, N/√Hz) or ``band_min`` (best amplitude in ``band``)."""
    if name not in OBJECTIVES:
        raise ConfigError(f"unknown objective {name!r}", "objective")
    if name == "band_min":
        if band is None or not 0 < band[0] < band[1]:
            raise ConfigError("band_min needs a band 0 < f_lo < f_hi", "objective.band")
        return lambda config: _band_min(config, points, band)
    return lambda config: _min_floor(config, points)


class _Evaluator:
    """Counts evaluations, keeps the trace and the best feasible point."""

    def __init__(self, config: SystemConfig, space: ParamSpace, objective: ObjectiveFn):
        self.config = config
        self.space = space
        self.objective = objective
        self.trace: List[Tuple[int, float]] = []
        self.best: Optional[Tuple[float, Dict[str, float], SystemConfig]] = None

    def candidate(self, u: Sequence[float]) -> Tuple[Dict[str, float], Optional[SystemConfig]]:
        values = self.space.values_at(u)
        try:
            return values, self.space.apply(self.config, values)
        except (PhysicsError, ConfigError) as e:
            logger.debug(f"Infeasible candidate {values}: {e}")
            return values, None

    def record(self, values: Dict[str, float], config: Optional[SystemConfig], value: float) -> float:
        self.trace.append((len(self.trace), value))
        if math.isfinite(value) and (self.best is None or value < self.best[0]):
            self.best = (value, values, config)
        return value

    def __call__(self, u: np.ndarray) -> float:
        values, config = self.candidate(u)
        value = _safe_objective(self.objective, config)
        return self.record(values, config, value)


def _safe_objective(objective: ObjectiveFn, config: Optional[SystemConfig]) -> float:
    if config is None:
        return math.inf
    try:
        value = float(objective(config))
    except (PhysicsError, NumericalError, RefusesGrid) as e:
        logger.debug(f"Objective infeasible: {e}")
        return math.inf
    return value if math.isfinite(value) else math.inf


def _resolve_objective(objective: Union[str, ObjectiveFn], band) -> Tuple[ObjectiveFn, str]:
    if callable(objective):
        return objective, getattr(objective, "__name__", "custom")
    return budget_objective(objective, band), objective


def optimize(
    config: SystemConfig,
    space: ParamSpace,
    objective: Union[str, ObjectiveFn] = "min_floor",
    budget_evals: int = 60,
    seed: int = 0,
    *,
    band: Optional[Tuple[float, float]] = None,
    n_jobs: Optional[int] = None,
) -> OptResult:
    """Minimize ``objective`` over ``space``, spending about ``budget_evals`` evaluations.

    Half the budget seeds a Latin hypercube; the rest is split over
    Nelder-Mead restarts from the best distinct seeds.
    """
    if budget_evals < MIN_EVALS:
        raise ConfigError(f"budget_evals must be >= {MIN_EVALS}", "optimize.evals")
    space.validate_against(config)
    objective_fn, objective_name = _resolve_objective(objective, band)
    n_jobs = get_settings().threads if n_jobs is None else n_jobs
    evaluator = _Evaluator(config, space, objective_fn)
    dim = len(space)

    n_seed = max(dim + 1, budget_evals // 2)
    samples = qmc.LatinHypercube(d=dim, seed=seed).random(n_seed)
    candidates = [evaluator.candidate(u) for u in samples]
    values = Parallel(n_jobs=n_jobs)(delayed(_safe_objective)(objective_fn, c) for _, c in candidates)
    for (params, candidate), value in zip(candidates, values):
        evaluator.record(params, candidate, value)
    logger.info(f"Seeded {n_seed} points, {sum(math.isfinite(v) for v in values)} feasible")

    order = [i for i in np.argsort(values, kind="stable") if math.isfinite(values[i])]
    if not order:
        raise NoFeasiblePoint(f"all {n_seed} seed points are infeasible")

    starts = order[:N_RESTARTS]
    remaining = budget_evals - n_seed
    per_restart = max(dim + 2, remaining // len(starts))
    for k, index in enumerate(starts):
        logger.info(f"Nelder-Mead restart {k + 1}/{len(starts)} from objective {values[index]:.4e}")
        sp_optimize.minimize(
            evaluator,
            samples[index],
            method="Nelder-Mead",
            bounds=[(0.0, 1.0)] * dim,
            options={"maxfev": per_restart, "xatol": SIMPLEX_XATOL, "fatol": math.inf},
        )

    best_value, best_params, best_config = evaluator.best
    logger.info(f"Optimization done after {len(evaluator.trace)} evaluations: best {best_value:.4e}")
    return OptResult(
        best_config=best_config,
        best_objective=best_value,
        best_params=best_params,
        trace=np.array(evaluator.trace, dtype=float),
        evaluations=len(evaluator.trace),
        objective=objective_name,
    )


def sensitivity_table(
    config: SystemConfig,
    space: ParamSpace,
    n_per_axis: int = 7,
    objective: Union[str, ObjectiveFn] = "min_floor",
    *,
    band: Optional[Tuple[float, float]] = None,
    n_jobs: Optional[int] = None,
) -> pd.DataFrame:
    """One-at-a-time scans of each axis around ``config``; columns param, value, floor."""
    if n_per_axis < 3:
        raise ConfigError("n_per_axis must be >= 3", "sensitivity.n_per_axis")
    space.validate_against(config)
    objective_fn, _ = _resolve_objective(objective, band)
    n_jobs = get_settings().threads if n_jobs is None else n_jobs

    rows: List[Tuple[str, float]] = []
    for entry in space.entries:
        scan = [entry.from_unit(u) for u in np.linspace(0.0, 1.0, n_per_axis)]
        for value in dict.fromkeys(scan):
            rows.append((entry.name, value))

    def _evaluate(name: str, value: float) -> float:
        try:
            candidate = space.apply(config, {name: value})
        except (PhysicsError, ConfigError):
            return math.inf
        return _safe_objective(objective_fn, candidate)

    floors = Parallel(n_jobs=n_jobs)(delayed(_evaluate)(name, value) for name, value in rows)
    return pd.DataFrame(
        {"param": [r[0] for r in rows], "value": [r[1] for r in rows], "floor": floors}
    )
