"""Constants, trap mode structure, coupling strength and susceptibilities.

Frequencies are angular (rad/s) throughout. Functions accept scalars or numpy
arrays for ``omega``. Functions that need ℏ or k_B take ``hbar=``/``k_b=``
overrides so the same formulas can be evaluated in natural units.
"""

import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Iterator, Optional, Tuple

import numpy as np
import scipy.constants as const

from .errors import DomainError, SingularResponse, TrapUnstable
from .models import AntennaConfig, CavityConfig, TrapConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhysConstants:
    hbar: float = const.hbar
    e_charge: float = const.e
    m_electron: float = const.m_e
    eps0: float = const.epsilon_0
    mu0: float = const.mu_0
    k_B: float = const.k
    mu_B: float = const.physical_constants["Bohr magneton"][0]
    c_light: float = const.c


_ACTIVE = PhysConstants()


def constants() -> PhysConstants:
    return _ACTIVE


@contextmanager
def override_constants(**changes) -> Iterator[PhysConstants]:
    """Test hook: temporarily replace constant values."""
    global _ACTIVE
    previous = _ACTIVE
    _ACTIVE = replace(previous, **changes)
    try:
        yield _ACTIVE
    finally:
        _ACTIVE = previous


@dataclass(frozen=True)
class ElectronModes:
    omega_z: float
    omega_c: float
    omega_plus: float
    omega_minus: float
    omega_l: float
    z_zp: float
    stable: bool


@dataclass(frozen=True)
class ComplexResponse:
    """Complex susceptibility samples on a frequency grid."""

    value: np.ndarray

    @property
    def re(self) -> np.ndarray:
        return np.real(self.value)

    @property
    def im(self) -> np.ndarray:
        return np.imag(self.value)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.value)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.value)

    @property
    def abs2(self) -> np.ndarray:
        return self.re ** 2 + self.im ** 2


def derive_modes(trap: TrapConfig, *, check: bool = True) -> ElectronModes:
    """Axial, cyclotron and magnetron frequencies of the ideal trap.

    With ``check=False`` an unstable trap is returned flagged instead of raising.
    """
    c = constants()
    d = trap.d
    omega_z = math.sqrt(c.e_charge * trap.V0 / (c.m_electron * d * d))
    omega_c = c.e_charge * trap.B0 / c.m_electron
    radicand = omega_c ** 2 - 2.0 * omega_z ** 2
    stable = radicand > 0
    if not stable:
        if check:
            raise TrapUnstable(omega_c, omega_z)
        logger.debug(f"Unstable trap: omega_c={omega_c:.4g}, omega_z={omega_z:.4g}")
        omega_l = math.nan
    else:
        omega_l = math.sqrt(radicand)
    z_zp = math.sqrt(c.hbar / (2.0 * c.m_electron * omega_z))
    return ElectronModes(
        omega_z=omega_z,
        omega_c=omega_c,
        omega_plus=0.5 * (omega_c + omega_l),
        omega_minus=0.5 * (omega_c - omega_l),
        omega_l=omega_l,
        z_zp=z_zp,
        stable=stable,
    )


def bose_occupation(x):
    """Bose–Einstein factor 1/(e^x − 1) for x = ℏω/k_BT; x = inf gives 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        n = 1.0 / np.expm1(x)
    return n if n.ndim else float(n)


def thermal_occupation(omega, T: float, *, hbar: Optional[float] = None, k_b: Optional[float] = None):
    """Mean thermal occupation n_th of a mode at angular frequency ``omega``."""
    c = constants()
    hbar = c.hbar if hbar is None else hbar
    k_b = c.k_B if k_b is None else k_b
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("thermal occupation needs omega > 0")
    if T < 0:
        raise DomainError("temperature must be >= 0")
    if T == 0:
        zero = np.zeros_like(omega)
        return zero if zero.ndim else 0.0
    return bose_occupation(hbar * omega / (k_b * T))


def gamma_larmor_free(omega):
    """Free-space Larmor decay rate e²Ω²/(6πε0mc³) of an electron oscillating at Ω."""
    c = constants()
    return c.e_charge ** 2 * np.asarray(omega, dtype=float) ** 2 / (
        6.0 * math.pi * c.eps0 * c.m_electron * c.c_light ** 3
    )


def antenna_length(trap: TrapConfig, antenna: AntennaConfig) -> float:
    modes = derive_modes(trap, check=False)
    return antenna.resolve_length(modes.omega_z, constants().c_light)


def zero_point_field(cavity: CavityConfig) -> float:
    """Vacuum field amplitude sqrt(ℏΩ_k/(2ε0V)) of the cavity mode."""
    c = constants()
    return math.sqrt(c.hbar * cavity.omega_k / (2.0 * c.eps0 * cavity.volume))


def coupling_strength(trap: TrapConfig, cavity: CavityConfig, antenna: AntennaConfig) -> float:
    """Electron–cavity interaction strength G in Hz/m."""
    c = constants()
    length = antenna_length(trap, antenna)
    return (
        trap.alpha_geom
        * c.e_charge
        * (length / (2.0 * trap.z0))
        * math.sqrt(cavity.omega_k / (2.0 * c.hbar * c.eps0 * cavity.volume))
    )


def chi_cavity(omega, cavity: CavityConfig) -> ComplexResponse:
    """Co-rotating cavity response (−i(Ω−Ω_k) + κ/2)⁻¹."""
    omega = np.asarray(omega, dtype=float)
    return ComplexResponse(1.0 / (-1j * (omega - cavity.omega_k) + cavity.kappa / 2.0))


def chi_cavity_counter(omega, cavity: CavityConfig) -> ComplexResponse:
    """Counter-rotating response (χ_k(−Ω))* = (κ/2 − i(Ω+Ω_k))⁻¹, the partner of a_k† at Ω."""
    omega = np.asarray(omega, dtype=float)
    return ComplexResponse(1.0 / (cavity.kappa / 2.0 - 1j * (omega + cavity.omega_k)))


def chi_mech(omega, omega_z: float, gamma: float, m: float) -> ComplexResponse:
    """Bare mechanical susceptibility (Ω_z² − Ω² − iγΩ)⁻¹/m."""
    omega = np.asarray(omega, dtype=float)
    if m <= 0 or gamma < 0:
        raise DomainError("chi_mech needs m > 0 and gamma >= 0")
    inverse = m * ((omega_z - omega) * (omega_z + omega) - 1j * gamma * omega)
    if np.any(inverse == 0):
        raise SingularResponse(f"undamped pole of the mechanical response at omega_z = {omega_z:.6g} rad/s")
    return ComplexResponse(1.0 / inverse)


def dynamical_backaction_spectrum(omega, cavity: CavityConfig, G: float, m: float, *, hbar: Optional[float] = None):
    """Frequency shift Ω_ba(Ω) and damping γ_ba(Ω) from the cavity's delayed force."""
    hbar = constants().hbar if hbar is None else hbar
    omega = np.asarray(omega, dtype=float)
    half_kappa2 = (cavity.kappa / 2.0) ** 2
    detuned = omega - cavity.omega_k
    summed = omega + cavity.omega_k
    lorentz_minus = 1.0 / (detuned ** 2 + half_kappa2)
    lorentz_plus = 1.0 / (summed ** 2 + half_kappa2)
    prefactor = hbar * G ** 2 / (2.0 * m * omega)
    omega_ba = prefactor * (detuned * lorentz_minus - summed * lorentz_plus)
    gamma_ba = prefactor * cavity.kappa * (lorentz_minus - lorentz_plus)
    return omega_ba, gamma_ba


def dynamical_backaction(omega_z: float, cavity: CavityConfig, G: float, m: float, *, hbar: Optional[float] = None) -> Tuple[float, float]:
    """Ω_ba and γ_ba evaluated at the bare axial frequency."""
    omega_ba, gamma_ba = dynamical_backaction_spectrum(omega_z, cavity, G, m, hbar=hbar)
    return float(omega_ba), float(gamma_ba)


def effective_frequency(omega_z: float, cavity: CavityConfig, G: float, m: float, *, hbar: Optional[float] = None) -> float:
    omega_ba, _ = dynamical_backaction(omega_z, cavity, G, m, hbar=hbar)
    return omega_z + omega_ba


def chi_eff(
    omega,
    omega_z: float,
    gamma_intrinsic: float,
    cavity: CavityConfig,
    G: float,
    m: float,
    *,
    hbar: Optional[float] = None,
) -> ComplexResponse:
    """Effective susceptibility χ_z⁻¹ − iℏG²(χ_k − χ̄_k), inverted."""
    hbar = constants().hbar if hbar is None else hbar
    omega = np.asarray(omega, dtype=float)
    if m <= 0 or gamma_intrinsic < 0:
        raise DomainError("chi_eff needs m > 0 and gamma >= 0")
    inverse = m * ((omega_z - omega) * (omega_z + omega) - 1j * gamma_intrinsic * omega)
    if G != 0:
        chi_k = chi_cavity(omega, cavity).value
        chi_bar = chi_cavity_counter(omega, cavity).value
        inverse = inverse - 1j * hbar * G ** 2 * (chi_k - chi_bar)
    if np.any(inverse == 0):
        raise SingularResponse("effective susceptibility has an exact pole on the grid")
    return ComplexResponse(1.0 / inverse)
