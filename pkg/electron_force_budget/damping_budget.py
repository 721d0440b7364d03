"""Axial damping budget: Larmor radiation into the cavity, antenna Ohmic loss,
dynamical backaction and cross-Kerr dephasing from trap non-idealities."""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List

import numpy as np

from .core_physics import (
    ElectronModes,
    constants,
    derive_modes,
    dynamical_backaction,
    gamma_larmor_free,
    thermal_occupation,
)
from .errors import DomainError, TrapUnstable
from .models import AntennaConfig, CavityConfig, NonIdealityConfig, TrapConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KerrCoefficients:
    d_omega_z: float
    d_omega_plus: float
    d_omega_minus: float
    omega_zz: float
    omega_pp: float
    omega_mm: float
    omega_pz: float
    omega_mz: float
    omega_pm: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class DampingBreakdown:
    gamma_larmor: float
    gamma_antenna: float
    gamma_ba: float
    gamma_dephase: float
    gamma_eff: float

    @property
    def gamma_intrinsic(self) -> float:
        """Damping of the bare oscillator; dynamical backaction enters via χ_eff."""
        return self.gamma_larmor + self.gamma_antenna + self.gamma_dephase

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def gamma_larmor_cavity(modes: ElectronModes, cavity: CavityConfig) -> float:
    """Cavity-suppressed Larmor rate e²π²/(6·V·Q·ε0·m·Ω_z) with Q the loaded quality factor."""
    c = constants()
    return c.e_charge ** 2 * math.pi ** 2 / (
        6.0 * cavity.volume * cavity.loaded_q * c.eps0 * c.m_electron * modes.omega_z
    )


def gamma_antenna(trap: TrapConfig, antenna: AntennaConfig, modes: ElectronModes) -> float:
    """Ohmic damping (e/2z0)²·R_d/m of the image current in the antenna."""
    c = constants()
    length = antenna.resolve_length(modes.omega_z, c.c_light)
    resistance = antenna.resistivity * length / antenna.cross_section
    return (c.e_charge / (2.0 * trap.z0)) ** 2 * resistance / c.m_electron


def kerr_coefficients(modes: ElectronModes, trap: TrapConfig, nonideal: NonIdealityConfig) -> KerrCoefficients:
    if not modes.stable:
        raise TrapUnstable(modes.omega_c, modes.omega_z)
    c = constants()
    q = c.e_charge
    m = c.m_electron
    d = trap.d
    omega_l2 = modes.omega_l ** 2

    coef_a = c.hbar * q / (d ** 4 * m ** 2 * omega_l2)
    coef_b = c.hbar * q ** 2 * trap.B0 / (d ** 2 * m ** 3 * omega_l2)
    coef_c = c.hbar * q / (d ** 2 * m ** 2 * modes.omega_l)

    phi40, phi22, phi04 = nonideal.phi40, nonideal.phi22, nonideal.phi04
    b20, b02 = nonideal.b20, nonideal.b02

    return KerrCoefficients(
        d_omega_z=coef_a * (3.0 * phi04 + 2.0 * phi22) + coef_b * b02 / 2.0,
        d_omega_plus=coef_a * (16.0 * phi40 + phi22) + 2.0 * coef_b * b20 + (coef_b - coef_c) * (2.0 * b20 + b02 / 4.0),
        d_omega_minus=coef_a * (16.0 * phi40 + phi22) + 2.0 * coef_b * b20 + (coef_b + coef_c) * (2.0 * b20 + b02 / 4.0),
        omega_zz=1.5 * coef_a * phi04,
        omega_pp=4.0 * coef_a * phi40 + (coef_b - coef_c) * b20,
        omega_mm=4.0 * coef_a * phi40 + (coef_b + coef_c) * b20,
        omega_pz=2.0 * coef_a * phi22 + 0.5 * (coef_b - coef_c) * b02,
        omega_mz=2.0 * coef_a * phi22 + 0.5 * (coef_b + coef_c) * b02,
        omega_pm=16.0 * coef_a * phi40 + 4.0 * coef_b * b20,
    )


def s_number(omega, n: float, gamma_j: float, omega_j: float):
    """Number-fluctuation spectrum of a damped thermal mode j: Lorentzian at 2Ω_j."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("number spectrum defined for omega > 0 only")
    if gamma_j <= 0:
        raise DomainError("mode decay rate must be positive")
    value = 2.0 * n * (n + 1.0) * gamma_j / (gamma_j ** 2 + (omega - 2.0 * omega_j) ** 2)
    return value if value.ndim else float(value)


def s_number_cyclotron(omega, n_plus: float, gamma_plus: float, omega_plus: float):
    return s_number(omega, n_plus, gamma_plus, omega_plus)


def gamma_dephasing(modes: ElectronModes, kerr: KerrCoefficients, T: float) -> float:
    """Axial dephasing from cyclotron number fluctuations via the cross-Kerr Ω_{+z}."""
    if not modes.stable:
        raise TrapUnstable(modes.omega_c, modes.omega_z)
    if kerr.omega_pz == 0:
        return 0.0
    n_plus = thermal_occupation(modes.omega_plus, T)
    gamma_plus = gamma_larmor_free(modes.omega_plus)
    return float(
        n_plus * (n_plus + 1.0) * gamma_plus * kerr.omega_pz ** 2
        / (gamma_plus ** 2 + (modes.omega_z - 2.0 * modes.omega_plus) ** 2)
    )


def gamma_dephasing_approx(modes: ElectronModes, kerr: KerrCoefficients, T: float) -> float:
    """Small-occupation, high-Q limit n·γ_+·(Ω_{+z}/(2Ω_+ − Ω_z))².

    n(n+1) → n and γ_+ ≪ |Ω_z − 2Ω_+|; the detuning is kept exact.
    """
    n_plus = thermal_occupation(modes.omega_plus, T)
    gamma_plus = gamma_larmor_free(modes.omega_plus)
    return float(n_plus * gamma_plus * (kerr.omega_pz / (2.0 * modes.omega_plus - modes.omega_z)) ** 2)


def dephasing_rates(modes: ElectronModes, kerr: KerrCoefficients, T: float) -> Dict[str, float]:
    """All cross-Kerr dephasing channels δγ_i^j = Ω_ij²/2·S_{n_j n_j}[Ω_i].

    Key ``"z<-plus"`` is the dephasing of z by the cyclotron mode. Magnetron
    decay uses its free-space Larmor rate; these are diagnostics only.
    """
    if not modes.stable:
        raise TrapUnstable(modes.omega_c, modes.omega_z)
    frequencies = {"z": modes.omega_z, "plus": modes.omega_plus, "minus": modes.omega_minus}
    couplings = {
        ("z", "plus"): kerr.omega_pz,
        ("z", "minus"): kerr.omega_mz,
        ("plus", "minus"): kerr.omega_pm,
    }
    rates: Dict[str, float] = {}
    for (a, b), coupling in couplings.items():
        for target, source in ((a, b), (b, a)):
            n = thermal_occupation(frequencies[source], T)
            gamma_source = gamma_larmor_free(frequencies[source])
            spectrum = s_number(frequencies[target], n, gamma_source, frequencies[source])
            rates[f"{target}<-{source}"] = 0.5 * coupling ** 2 * spectrum
    return rates


def compose_damping(
    trap: TrapConfig,
    cavity: CavityConfig,
    antenna: AntennaConfig,
    nonideal: NonIdealityConfig,
    G: float,
    T: float,
) -> DampingBreakdown:
    modes = derive_modes(trap)
    m = constants().m_electron
    gamma_l = gamma_larmor_cavity(modes, cavity)
    gamma_a = gamma_antenna(trap, antenna, modes)
    _, gamma_ba = dynamical_backaction(modes.omega_z, cavity, G, m) if G != 0 else (0.0, 0.0)
    kerr = kerr_coefficients(modes, trap, nonideal)
    gamma_d = gamma_dephasing(modes, kerr, T)
    breakdown = DampingBreakdown(
        gamma_larmor=gamma_l,
        gamma_antenna=gamma_a,
        gamma_ba=gamma_ba,
        gamma_dephase=gamma_d,
        gamma_eff=gamma_l + gamma_a + gamma_ba + gamma_d,
    )
    logger.debug(f"Damping breakdown: {breakdown.to_dict()}")
    return breakdown


def dephasing_scan(
    sizes_m: List[float],
    fractions: List[float],
    V0: float = 19.0,
    B0: float = 0.5,
    T: float = 4.0,
) -> np.ndarray:
    """Fractional dephasing δγ_z/γ_L^free over trap size and non-ideality fraction.

    Each fraction f sets Φ_22 = f·V0 and B_02 = f·B0. Rows follow ``sizes_m``,
    columns follow ``fractions``.
    """
    table = np.zeros((len(sizes_m), len(fractions)))
    for i, d in enumerate(sizes_m):
        trap = TrapConfig(V0=V0, B0=B0, d=d, T_trap=T)
        modes = derive_modes(trap)
        reference = gamma_larmor_free(modes.omega_z)
        for j, fraction in enumerate(fractions):
            nonideal = NonIdealityConfig(phi22=fraction * V0, b02=fraction * B0)
            kerr = kerr_coefficients(modes, trap, nonideal)
            table[i, j] = gamma_dephasing(modes, kerr, T) / reference
    return table
