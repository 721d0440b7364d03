"""Configuration models for the trapped-electron force-noise budget.

All models are immutable pydantic models. Internal frequencies are angular
(rad/s); config files may give ordinary frequencies with an ``_hz`` suffix,
which are converted on load.
"""

import configparser
import logging
import math
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from .errors import ConfigError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
DEBYE = 3.33564e-30  # C·m
# erg⁻¹ cm⁻³ → J⁻¹ m⁻³: 1 erg = 1e-7 J, 1 cm⁻³ = 1e6 m⁻³
CGS_DENSITY_OF_STATES_TO_SI = 1e13
EPS0_SI = 8.8541878128e-12

CONFIG_DIR = Path(__file__).parent / "configs"
DESIGN_CONFIG_PATH = CONFIG_DIR / "design_point.cfg"

_FROZEN = ConfigDict(extra="forbid", frozen=True, ser_json_inf_nan="constants")


def _convert_hz(data: Any, mapping: Dict[str, str]) -> Any:
    if not isinstance(data, dict):
        return data
    data = dict(data)
    for hz_key, rad_key in mapping.items():
        if hz_key in data:
            if rad_key in data:
                raise ValueError(f"give either {hz_key} or {rad_key}, not both")
            value = data.pop(hz_key)
            if isinstance(value, (list, tuple)):
                data[rad_key] = tuple(TWO_PI * float(v) for v in value)
            else:
                data[rad_key] = None if value is None else TWO_PI * float(value)
    return data


class TrapConfig(BaseModel):
    """Ideal Penning trap: electrode geometry, potentials and temperature."""

    model_config = _FROZEN

    V0: float = 19.3
    B0: float = 0.5
    z0: float = 50e-6
    rho0: float = 50e-6 * math.sqrt(2.0)
    alpha_geom: float = 1.0
    T_trap: float = 4.0

    @model_validator(mode="before")
    @classmethod
    def _from_characteristic_size(cls, data: Any) -> Any:
        # `d` alone means z0 ≈ d, rho0 chosen so the characteristic size is d
        if isinstance(data, dict) and "d" in data:
            data = dict(data)
            d = float(data.pop("d"))
            if "rho0" in data:
                raise ValueError("give either d or rho0, not both")
            z0 = float(data.setdefault("z0", d))
            radicand = 2.0 * (2.0 * d * d - z0 * z0)
            if radicand <= 0:
                raise ValueError(f"d = {d} is incompatible with z0 = {z0}")
            data["rho0"] = math.sqrt(radicand)
        return data

    @field_validator("V0", "B0", "z0", "rho0")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not (value > 0 and math.isfinite(value)):
            raise ValueError("must be positive and finite")
        return value

    @field_validator("alpha_geom")
    @classmethod
    def _unit_interval(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("must lie in [0, 1]")
        return value

    @field_validator("T_trap")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if not (value >= 0 and math.isfinite(value)):
            raise ValueError("must be >= 0")
        return value

    @property
    def d(self) -> float:
        """Characteristic trap size sqrt((z0² + rho0²/2)/2)."""
        return math.sqrt((self.z0 ** 2 + self.rho0 ** 2 / 2.0) / 2.0)


class CavityConfig(BaseModel):
    """Readout cavity mode, its couplings and the homodyne settings."""

    model_config = _FROZEN

    omega_k: float = TWO_PI * 5.5e9
    Q_int: float = 1e5
    Q_ext: float = 1e3
    dims: Tuple[float, float, float] = (0.256, 0.027, 0.150)
    omega_in: Optional[float] = None
    theta_lo: float = math.pi / 2.0
    T_cav: float = 4.0

    @model_validator(mode="before")
    @classmethod
    def _hz_fields(cls, data: Any) -> Any:
        return _convert_hz(data, {"f_k_hz": "omega_k", "f_in_hz": "omega_in"})

    @field_validator("omega_k", "Q_ext", "Q_int")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be positive")
        return value

    @field_validator("dims")
    @classmethod
    def _box(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(not (v > 0 and math.isfinite(v)) for v in value):
            raise ValueError("all box dimensions must be positive")
        return value

    @field_validator("omega_in")
    @classmethod
    def _drive(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError("must be positive")
        return value

    @field_validator("theta_lo")
    @classmethod
    def _angle(cls, value: float) -> float:
        if not 0.0 <= value < TWO_PI:
            raise ValueError("must lie in [0, 2*pi)")
        return value

    @field_validator("T_cav")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if not value >= 0:
            raise ValueError("must be >= 0")
        return value

    @classmethod
    def from_rates(cls, omega_k: float, kappa_in: float, kappa_add: float, **kwargs) -> "CavityConfig":
        """Build a cavity from decay rates instead of quality factors."""
        q_int = math.inf if kappa_add == 0 else omega_k / (2.0 * kappa_add)
        return cls(omega_k=omega_k, Q_ext=omega_k / (2.0 * kappa_in), Q_int=q_int, **kwargs)

    @property
    def kappa_in(self) -> float:
        return self.omega_k / (2.0 * self.Q_ext)

    @property
    def kappa_add(self) -> float:
        return self.omega_k / (2.0 * self.Q_int)

    @property
    def kappa(self) -> float:
        return self.kappa_in + self.kappa_add

    @property
    def loaded_q(self) -> float:
        return self.omega_k / self.kappa

    @property
    def volume(self) -> float:
        lx, ly, lz = self.dims
        return lx * ly * lz

    @property
    def drive(self) -> float:
        """Drive (local oscillator) frequency; defaults to the cavity resonance."""
        return self.omega_k if self.omega_in is None else self.omega_in


class AntennaConfig(BaseModel):
    model_config = _FROZEN

    length_l: Union[float, Literal["auto"]] = "auto"
    width_w: float = 0.05
    thickness_tm: float = 200e-9
    resistivity: float = 22.1e-9

    @field_validator("length_l")
    @classmethod
    def _length(cls, value: Union[float, str]) -> Union[float, str]:
        if value != "auto" and not value > 0:
            raise ValueError("must be positive or 'auto'")
        return value

    @field_validator("width_w", "thickness_tm")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be positive")
        return value

    @field_validator("resistivity")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if not value >= 0:
            raise ValueError("must be >= 0")
        return value

    @property
    def cross_section(self) -> float:
        return self.width_w * self.thickness_tm

    def resolve_length(self, omega_z: float, c_light: float) -> float:
        """Antenna length; 'auto' is the half-wave length π·c/Ω_z."""
        if self.length_l == "auto":
            return math.pi * c_light / omega_z
        return float(self.length_l)


class NonIdealityConfig(BaseModel):
    """Anharmonic multipoles Φ_40, Φ_22, Φ_04 (V) and field curvatures B_20, B_02 (T)."""

    model_config = _FROZEN

    phi40: float = 0.0
    phi22: float = 0.0
    phi04: float = 0.0
    b20: float = 0.0
    b02: float = 0.0

    @field_validator("phi40", "phi22", "phi04", "b20", "b02")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value

    @property
    def is_ideal(self) -> bool:
        return not any((self.phi40, self.phi22, self.phi04, self.b20, self.b02))


class ElectrodeMaterial(BaseModel):
    """Electrode metal and its surface dielectric layer.

    ``standoff_z`` defaults to the trap half-gap z0 when left unset.
    """

    model_config = _FROZEN

    resistivity: float = 22.1e-9
    t_metal: float = 200e-9
    t_dielectric: float = 2e-9
    eps_dielectric: float = 2.0 * EPS0_SI
    loss_tangent_d: float = 0.01
    standoff_z: Optional[float] = None

    @model_validator(mode="before")
    @classmethod
    def _relative_permittivity(cls, data: Any) -> Any:
        if isinstance(data, dict) and "eps_dielectric_rel" in data:
            data = dict(data)
            if "eps_dielectric" in data:
                raise ValueError("give either eps_dielectric or eps_dielectric_rel, not both")
            data["eps_dielectric"] = float(data.pop("eps_dielectric_rel")) * EPS0_SI
        return data

    @field_validator("resistivity", "t_dielectric")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if not value >= 0:
            raise ValueError("must be >= 0")
        return value

    @field_validator("t_metal", "eps_dielectric")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be positive")
        return value

    @field_validator("loss_tangent_d")
    @classmethod
    def _loss_tangent(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError("must lie in [0, 1)")
        return value

    @field_validator("standoff_z")
    @classmethod
    def _standoff(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError("must be positive")
        return value


class MagnetMaterial(BaseModel):
    """Permanent-magnet constants for the Barkhausen model (SmCo defaults).

    ``alpha_decay`` is a (low, high) pair in rad/s spanning the plausible
    magnetization relaxation rates.
    """

    model_config = _FROZEN

    g_s: float = 7.120
    V_uc: float = 84.703e-30
    T_c: float = 800.0
    alpha_decay: Tuple[float, float] = (TWO_PI * 1.0, TWO_PI * 1e6)
    T_mag: float = 4.0

    @model_validator(mode="before")
    @classmethod
    def _hz_fields(cls, data: Any) -> Any:
        return _convert_hz(data, {"alpha_decay_hz": "alpha_decay"})

    @field_validator("g_s", "V_uc", "T_c")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be positive")
        return value

    @field_validator("alpha_decay")
    @classmethod
    def _band(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not (0 < low <= high):
            raise ValueError("must satisfy 0 < low <= high")
        return value

    @field_validator("T_mag")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if not value >= 0:
            raise ValueError("must be >= 0")
        return value


class TlsMaterial(BaseModel):
    """Amorphous-dielectric two-level-system parameters (fused silica defaults).

    P0 is stored in J⁻¹m⁻³; ``P0_cgs`` (erg⁻¹cm⁻³) is converted once on load.
    ``V_tls`` defaults to the antenna slab volume l·2d·w when unset.
    """

    model_config = _FROZEN

    P0: float = 4.35e44
    A_rate: float = 1e8
    dipole_p: float = 0.5 * DEBYE
    eps_r: float = 3.7
    t_exp: float = 1e5
    V_tls: Optional[float] = None

    @model_validator(mode="before")
    @classmethod
    def _units(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if "P0_cgs" in data:
            if "P0" in data:
                raise ValueError("give either P0 or P0_cgs, not both")
            data["P0"] = float(data.pop("P0_cgs")) * CGS_DENSITY_OF_STATES_TO_SI
        if "dipole_debye" in data:
            if "dipole_p" in data:
                raise ValueError("give either dipole_p or dipole_debye, not both")
            data["dipole_p"] = float(data.pop("dipole_debye")) * DEBYE
        return data

    @field_validator("P0", "A_rate", "dipole_p", "eps_r", "t_exp")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be positive")
        return value

    @field_validator("V_tls")
    @classmethod
    def _volume(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError("must be positive")
        return value


class BudgetOptions(BaseModel):
    """Inclusion switches for the assembled total."""

    model_config = _FROZEN

    include_uncertain: bool = False
    include_readout: bool = True
    retune_antenna: bool = True
    orbit_variant: Literal["linear", "rms"] = "linear"


class SystemConfig(BaseModel):
    """Full experiment description.

    A top-level ``temperature_k`` sets the trap, cavity and magnet bath
    temperatures jointly; explicit per-section temperatures win.
    """

    model_config = _FROZEN

    trap: TrapConfig = TrapConfig()
    cavity: CavityConfig = CavityConfig()
    antenna: AntennaConfig = AntennaConfig()
    nonideal: NonIdealityConfig = NonIdealityConfig()
    electrode: ElectrodeMaterial = ElectrodeMaterial()
    magnet: MagnetMaterial = MagnetMaterial()
    tls: TlsMaterial = TlsMaterial()
    budget: BudgetOptions = BudgetOptions()

    @model_validator(mode="before")
    @classmethod
    def _joint_temperature(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "temperature_k" not in data:
            return data
        data = dict(data)
        temperature = float(data.pop("temperature_k"))
        for section, key in (("trap", "T_trap"), ("cavity", "T_cav"), ("magnet", "T_mag")):
            current = data.get(section, {})
            if isinstance(current, BaseModel):
                current = current.model_dump()
            current = dict(current)
            current.setdefault(key, temperature)
            data[section] = current
        return data

    def with_temperature(self, temperature: float) -> "SystemConfig":
        """Copy with every bath at the same temperature."""
        return self.model_copy(
            update={
                "trap": self.trap.model_copy(update={"T_trap": temperature}),
                "cavity": self.cavity.model_copy(update={"T_cav": temperature}),
                "magnet": self.magnet.model_copy(update={"T_mag": temperature}),
            }
        )

    def replace(self, path: str, value: Any) -> "SystemConfig":
        """Copy with one dotted field (``trap.V0``) replaced and re-validated."""
        section, _, key = path.partition(".")
        if not key or section not in type(self).model_fields:
            raise ConfigError("not a config field", path)
        data = self.model_dump()
        if key not in data[section] and key not in ("f_k_hz", "f_in_hz"):
            raise ConfigError("not a config field", path)
        data[section][key] = value
        if key in ("f_k_hz", "f_in_hz"):
            data[section].pop("omega_k" if key == "f_k_hz" else "omega_in")
        return validate_config(data)

    def get(self, path: str) -> Any:
        section, _, key = path.partition(".")
        if key == "f_k_hz" and section == "cavity":
            return self.cavity.omega_k / TWO_PI
        try:
            return getattr(getattr(self, section), key)
        except AttributeError:
            raise ConfigError("not a config field", path)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def _error_path(exc: ValidationError) -> str:
    first = exc.errors()[0]
    return ".".join(str(part) for part in first["loc"]) or "<root>"


def validate_config(data: Dict[str, Any]) -> SystemConfig:
    """Validate a nested mapping, converting pydantic errors to ConfigError."""
    try:
        return SystemConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], _error_path(e)) from e


def _parse_ini_value(raw: str) -> Any:
    text = raw.strip()
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("none", ""):
        return None
    if "," in text:
        return tuple(_parse_ini_value(part) for part in text.split(","))
    try:
        return float(text)
    except ValueError:
        return text


def load_ini(path: Union[str, Path]) -> SystemConfig:
    """Load a sectioned key=value config; ``[baths] temperature_k`` is the joint shorthand."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    data: Dict[str, Any] = {}
    for section in parser.sections():
        values = {key: _parse_ini_value(raw) for key, raw in parser.items(section)}
        if section == "baths":
            for key, value in values.items():
                if key != "temperature_k":
                    raise ConfigError("unknown key", f"baths.{key}")
                data["temperature_k"] = value
            continue
        data[section] = values
    logger.debug(f"Loaded INI config from {path} with sections {parser.sections()}")
    return validate_config(data)


def load_json(path: Union[str, Path]) -> SystemConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    try:
        return SystemConfig.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], _error_path(e)) from e


def load_config(path: Union[str, Path]) -> SystemConfig:
    """Load INI (.cfg/.ini) or JSON (.json) into a SystemConfig."""
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return load_json(path)
    return load_ini(path)


def design_config() -> SystemConfig:
    """The shipped design-point configuration."""
    return load_ini(DESIGN_CONFIG_PATH)
