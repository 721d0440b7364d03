"""Total force-noise budget: channel assembly, minimum search and voltage sweeps."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .core_physics import (
    chi_eff,
    constants,
    coupling_strength,
    derive_modes,
    dynamical_backaction,
)
from .damping_budget import DampingBreakdown, compose_damping
from .errors import ConfigError, RefusesGrid, TrapUnstable
from .models import TWO_PI, SystemConfig
from .noise_spectra import (
    SpectrumChannel,
    s_ff_backaction_full,
    s_ff_barkhausen,
    s_ff_cross_full,
    s_ff_dielectric,
    s_ff_free_limit,
    s_ff_imprecision_full,
    s_ff_intrinsic,
    s_ff_johnson,
    s_ff_readout_additional,
    s_ff_tls,
    sql_bound,
)
from .settings import get_settings

logger = logging.getLogger(__name__)

DEFAULT_F_LO = 1e9
DEFAULT_F_HI = 20e9
DEFAULT_POINTS = 4096
WINDOW_POINTS = 256
MIN_WINDOW_POINTS = 200
WINDOW_LINEWIDTHS = 10.0

# CSV column order; free_limit is appended after the fixed block
CHANNEL_COLUMNS = (
    "total", "int", "ba", "imp", "cross2re", "read_add", "johnson",
    "dielectric", "barkhausen_lo", "barkhausen_hi", "tls", "sql",
)
READOUT_CHANNELS = ("ba", "imp", "cross2re", "read_add")
UNCERTAIN_CHANNELS = ("barkhausen_hi", "tls")


@dataclass(frozen=True)
class FrequencyGrid:
    """Ordinary frequencies in Hz; ``windows`` lists (center, half_width) of refined regions."""

    points: np.ndarray
    kind: str
    windows: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", points)
        if points.ndim != 1 or points.size < 2:
            raise ConfigError("grid needs at least 2 points", "grid.points")
        if not np.all(np.diff(points) > 0) or points[0] <= 0:
            raise ConfigError("grid must be positive and strictly increasing", "grid.points")
        if self.kind not in ("lin", "log", "refined"):
            raise ConfigError(f"unknown grid kind {self.kind!r}", "grid.kind")
        for center, half_width in self.windows:
            inside = np.count_nonzero(np.abs(points - center) <= half_width)
            if inside < MIN_WINDOW_POINTS:
                raise ConfigError(
                    f"refined window at {center:.6g} Hz holds {inside} points, needs {MIN_WINDOW_POINTS}",
                    "grid.points",
                )

    @property
    def omega(self) -> np.ndarray:
        return TWO_PI * self.points

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    def __len__(self) -> int:
        return self.points.size


def make_grid(
    kind: str = "log",
    f_lo: float = DEFAULT_F_LO,
    f_hi: float = DEFAULT_F_HI,
    n: int = DEFAULT_POINTS,
    *,
    windows: Sequence[Tuple[float, float]] = (),
    window_points: int = WINDOW_POINTS,
) -> FrequencyGrid:
    """Linear, logarithmic or resonance-refined grid of ``n`` points (refined grids may
    hold slightly fewer where window points coincide with base points)."""
    if not 0 < f_lo < f_hi:
        raise ConfigError("need 0 < f_lo < f_hi", "grid.span")
    if kind == "lin":
        return FrequencyGrid(np.linspace(f_lo, f_hi, n), "lin")
    if kind == "log":
        return FrequencyGrid(np.geomspace(f_lo, f_hi, n), "log")
    if kind != "refined":
        raise ConfigError(f"unknown grid kind {kind!r}", "grid.kind")
    if not windows:
        raise ConfigError("refined grid needs at least one resonance window", "grid.windows")
    n_base = n - window_points * len(windows)
    if n_base < 2:
        raise ConfigError(f"{n} points cannot hold {len(windows)} refined windows", "grid.points")
    pieces = [np.geomspace(f_lo, f_hi, n_base)]
    for center, half_width in windows:
        pieces.append(np.linspace(center - half_width, center + half_width, window_points))
    points = np.unique(np.concatenate(pieces))
    return FrequencyGrid(points, "refined", tuple((float(c), float(w)) for c, w in windows))


@dataclass
class NoiseBudget:
    grid: FrequencyGrid
    channels: Dict[str, SpectrumChannel]
    total: SpectrumChannel
    meta: Dict = field(default_factory=dict)

    def amplitude(self, name: str = "total") -> np.ndarray:
        """Amplitude spectral density in N/√Hz."""
        channel = self.total if name == "total" else self.channels[name]
        return channel.amplitude()

    def to_frame(self) -> pd.DataFrame:
        columns = {"frequency_hz": self.grid.points}
        for name in CHANNEL_COLUMNS:
            columns[name] = self.amplitude(name)
        for name in self.channels:
            if name not in columns:
                columns[name] = self.amplitude(name)
        return pd.DataFrame(columns)


def resonance_window(config: SystemConfig) -> Tuple[float, float]:
    """(f_z^eff, half-width) in Hz of the region the minimum search must resolve."""
    modes = derive_modes(config.trap)
    G = coupling_strength(config.trap, config.cavity, config.antenna)
    damping = compose_damping(config.trap, config.cavity, config.antenna, config.nonideal, G, config.trap.T_trap)
    omega_ba, _ = dynamical_backaction(modes.omega_z, config.cavity, G, constants().m_electron) if G else (0.0, 0.0)
    return (modes.omega_z + omega_ba) / TWO_PI, WINDOW_LINEWIDTHS * damping.gamma_eff / TWO_PI


def resonance_grid(
    config: SystemConfig,
    kind: str = "refined",
    n: int = DEFAULT_POINTS,
    f_lo: float = DEFAULT_F_LO,
    f_hi: float = DEFAULT_F_HI,
) -> FrequencyGrid:
    """Default budget grid; the span is widened to contain the resonance window."""
    center, half_width = resonance_window(config)
    f_lo = min(f_lo, center - half_width)
    f_hi = max(f_hi, center + half_width)
    if kind != "refined":
        return make_grid(kind, f_lo, f_hi, n)
    return make_grid("refined", f_lo, f_hi, n, windows=[(center, half_width)])


class BudgetAssembler:
    """Evaluates every force-noise channel of one configuration on a grid."""

    def __init__(self, config: SystemConfig):
        self.config = config
        self.modes = derive_modes(config.trap)
        self.m = constants().m_electron
        self.G = coupling_strength(config.trap, config.cavity, config.antenna)
        self.antenna_length = config.antenna.resolve_length(self.modes.omega_z, constants().c_light)
        self.damping: DampingBreakdown = compose_damping(
            config.trap, config.cavity, config.antenna, config.nonideal, self.G, config.trap.T_trap
        )
        if self.G:
            self.omega_ba, _ = dynamical_backaction(self.modes.omega_z, config.cavity, self.G, self.m)
        else:
            self.omega_ba = 0.0
        self.omega_z_eff = self.modes.omega_z + self.omega_ba

    def assemble(self, grid: FrequencyGrid) -> NoiseBudget:
        f_eff = self.omega_z_eff / TWO_PI
        f_lo, f_hi = grid.span
        if not f_lo <= f_eff <= f_hi:
            raise RefusesGrid(f"grid [{f_lo:.6g}, {f_hi:.6g}] Hz misses the resonance at {f_eff:.6g} Hz")

        omega = grid.omega
        chi = chi_eff(omega, self.modes.omega_z, self.damping.gamma_intrinsic, self.config.cavity, self.G, self.m)
        channels: Dict[str, SpectrumChannel] = {}
        for values in (
            self._assess_intrinsic(omega),
            self._assess_readout(omega, chi),
            self._assess_electrodes(omega),
            self._assess_uncertain(omega),
        ):
            for name, (data, signed) in values.items():
                channels[name] = SpectrumChannel(name, data, signed=signed)
        channels["sql"] = SpectrumChannel("sql", sql_bound(omega, chi))

        total = self._compose_total(channels)
        meta = self._meta()
        logger.info(
            f"Budget assembled on {len(grid)} points: f_z_eff = {f_eff / 1e9:.6f} GHz, "
            f"min total = {np.sqrt(total.values.min()):.3e} N/rtHz"
        )
        return NoiseBudget(grid=grid, channels=channels, total=total, meta=meta)

    def _assess_intrinsic(self, omega: np.ndarray) -> Dict:
        T = self.config.trap.T_trap
        return {
            "int": (s_ff_intrinsic(omega, self.m, self.damping.gamma_eff, T), False),
            "free_limit": (s_ff_free_limit(omega, T), False),
        }

    def _assess_readout(self, omega: np.ndarray, chi) -> Dict:
        cavity = self.config.cavity
        T = cavity.T_cav
        theta = cavity.theta_lo
        cross = s_ff_cross_full(omega, cavity, self.G, chi, theta, T)
        ba_add, imp_add = s_ff_readout_additional(omega, cavity, self.G, chi, T)
        return {
            "ba": (s_ff_backaction_full(omega, cavity, self.G, T), False),
            "imp": (s_ff_imprecision_full(omega, cavity, self.G, chi, theta, T), False),
            "cross2re": (2.0 * np.real(cross), True),
            "read_add": (np.asarray(ba_add) + np.asarray(imp_add), False),
        }

    def _assess_electrodes(self, omega: np.ndarray) -> Dict:
        electrode = self.config.electrode
        T = self.config.trap.T_trap
        z = self.config.trap.z0
        return {
            "johnson": (s_ff_johnson(omega, electrode, T, z=z), False),
            "dielectric": (s_ff_dielectric(omega, electrode, T, z=z), False),
        }

    def _assess_uncertain(self, omega: np.ndarray) -> Dict:
        magnet = self.config.magnet
        T = self.config.trap.T_trap
        variant = self.config.budget.orbit_variant
        alpha_lo, alpha_hi = magnet.alpha_decay
        v_tls = self.antenna_length * 2.0 * self.config.trap.d * self.config.antenna.width_w
        return {
            "barkhausen_lo": (s_ff_barkhausen(omega, magnet, self.modes, T, alpha=alpha_lo, variant=variant), False),
            "barkhausen_hi": (s_ff_barkhausen(omega, magnet, self.modes, T, alpha=alpha_hi, variant=variant), False),
            "tls": (s_ff_tls(omega, self.config.tls, self.config.cavity, self.G, self.config.cavity.T_cav, v_tls=v_tls), False),
        }

    def _compose_total(self, channels: Dict[str, SpectrumChannel]) -> SpectrumChannel:
        options = self.config.budget
        names = ["int", "johnson", "dielectric"]
        if options.include_readout:
            names.extend(READOUT_CHANNELS)
        if options.include_uncertain:
            names.extend(UNCERTAIN_CHANNELS)
        total = np.zeros_like(channels["int"].values)
        for name in names:
            total = total + channels[name].values
        return SpectrumChannel("total", total, meta={"components": names})

    def _meta(self) -> Dict:
        cavity = self.config.cavity
        return {
            "omega_z": self.modes.omega_z,
            "omega_plus": self.modes.omega_plus,
            "omega_minus": self.modes.omega_minus,
            "omega_ba": self.omega_ba,
            "omega_z_eff": self.omega_z_eff,
            "f_z_eff_hz": self.omega_z_eff / TWO_PI,
            "G": self.G,
            "antenna_length": self.antenna_length,
            "kappa": cavity.kappa,
            "kappa_in": cavity.kappa_in,
            "kappa_add": cavity.kappa_add,
            "gamma": self.damping.to_dict(),
            "config": self.config.model_dump(mode="json"),
        }


def assemble_budget(config: SystemConfig, grid: FrequencyGrid) -> NoiseBudget:
    return BudgetAssembler(config).assemble(grid)


def _log_amplitude_vertex(f: np.ndarray, log_amp: np.ndarray) -> Optional[Tuple[float, float]]:
    x = f - f[1]
    a, b, c = np.polyfit(x, log_amp, 2)
    if a <= 0:
        return None
    x_min = -b / (2.0 * a)
    if not x[0] <= x_min <= x[2]:
        return None
    return f[1] + x_min, c - b * b / (4.0 * a)


def find_minimum(budget: NoiseBudget) -> Tuple[float, float]:
    """Frequency (Hz) and amplitude (N/√Hz) of the total's minimum.

    The discrete minimum is refined by a parabola through its neighbours in
    log-amplitude.
    """
    if budget.grid.kind != "refined":
        raise RefusesGrid("minimum search needs a resonance-refined grid")
    values = budget.total.values
    if not np.all(values > 0):
        raise RefusesGrid("total must be positive everywhere to search its minimum")
    f = budget.grid.points
    i = int(np.argmin(values))
    amp = math.sqrt(values[i])
    if 0 < i < f.size - 1:
        vertex = _log_amplitude_vertex(f[i - 1:i + 2], 0.5 * np.log(values[i - 1:i + 2]))
        if vertex is not None and math.exp(vertex[1]) <= amp:
            return float(vertex[0]), math.exp(vertex[1])
    return float(f[i]), amp


@dataclass
class BroadbandEnvelope:
    """Per-voltage totals on a shared grid and their pointwise minimum."""

    voltages: np.ndarray
    f_min: np.ndarray
    s_min: np.ndarray
    grid: FrequencyGrid
    totals: np.ndarray
    envelope: np.ndarray
    skipped: List[float] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "voltage_v": self.voltages,
                "f_min_hz": self.f_min,
                "amp_min": np.sqrt(self.s_min),
            }
        )

    def envelope_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"frequency_hz": self.grid.points, "envelope": np.sqrt(self.envelope)})


def _sweep_config(config: SystemConfig, voltage: float) -> SystemConfig:
    return config.replace("trap.V0", float(voltage))


def _sweep_point(config: SystemConfig, grid: FrequencyGrid) -> Tuple[np.ndarray, float, float]:
    budget = assemble_budget(config, grid)
    f_min, amp_min = find_minimum(budget)
    return budget.total.values, f_min, amp_min ** 2


def voltage_sweep(
    config: SystemConfig,
    v_lo: float,
    v_hi: float,
    n_steps: int,
    *,
    n: int = DEFAULT_POINTS,
    f_lo: float = DEFAULT_F_LO,
    f_hi: float = DEFAULT_F_HI,
    n_jobs: Optional[int] = None,
) -> BroadbandEnvelope:
    """Budgets across trap voltages on one grid refined around every resonance.

    Voltages giving an unstable trap are skipped and reported. With
    ``budget.retune_antenna`` off, the antenna keeps the length resolved at
    the base voltage.
    """
    if n_steps < 1 or v_lo > v_hi or (n_steps > 1 and v_lo == v_hi):
        raise ConfigError("need v_lo < v_hi and n_steps >= 1", "sweep")
    n_jobs = get_settings().threads if n_jobs is None else n_jobs

    base = config
    if not config.budget.retune_antenna and config.antenna.length_l == "auto":
        length = config.antenna.resolve_length(derive_modes(config.trap).omega_z, constants().c_light)
        base = config.replace("antenna.length_l", length)

    accepted: List[Tuple[float, SystemConfig]] = []
    skipped: List[float] = []
    windows = []
    for voltage in np.linspace(v_lo, v_hi, n_steps):
        candidate = _sweep_config(base, voltage)
        try:
            windows.append(resonance_window(candidate))
        except TrapUnstable as e:
            logger.warning(f"Skipping V0 = {voltage:.4g} V: {e}")
            skipped.append(float(voltage))
            continue
        accepted.append((float(voltage), candidate))
    if not accepted:
        modes = derive_modes(_sweep_config(base, v_lo).trap, check=False)
        raise TrapUnstable(modes.omega_c, modes.omega_z)

    f_lo = min(f_lo, min(c - w for c, w in windows))
    f_hi = max(f_hi, max(c + w for c, w in windows))
    grid = make_grid("refined", f_lo, f_hi, n + WINDOW_POINTS * len(windows), windows=windows)
    logger.info(f"Sweeping {len(accepted)} voltages on {len(grid)} points with n_jobs={n_jobs}")

    results = Parallel(n_jobs=n_jobs)(delayed(_sweep_point)(candidate, grid) for _, candidate in accepted)
    totals = np.vstack([r[0] for r in results])
    return BroadbandEnvelope(
        voltages=np.array([v for v, _ in accepted]),
        f_min=np.array([r[1] for r in results]),
        s_min=np.array([r[2] for r in results]),
        grid=grid,
        totals=totals,
        envelope=totals.min(axis=0),
        skipped=skipped,
    )
