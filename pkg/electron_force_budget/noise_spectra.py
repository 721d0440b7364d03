"""Force-noise spectral densities acting on the axial mode.

Every function returns a symmetrized, two-sided spectral density in N²/Hz
evaluated on angular frequencies ``omega`` (scalar or array). Quantum
readout spectra come in a full two-sideband form and the co-rotating
approximation used around the axial resonance.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy import integrate

from .core_physics import (
    ComplexResponse,
    ElectronModes,
    bose_occupation,
    chi_cavity,
    chi_cavity_counter,
    constants,
    gamma_larmor_free,
    thermal_occupation,
    zero_point_field,
)
from .errors import DomainError, IntegrationFailure, QuadratureSingular, SingularResponse, TrapUnstable
from .models import CavityConfig, ElectrodeMaterial, MagnetMaterial, TlsMaterial

logger = logging.getLogger(__name__)

Weights = Tuple[Union[float, np.ndarray], Union[float, np.ndarray]]

TLS_QUAD_RTOL = 1e-6


@dataclass
class SpectrumChannel:
    """One named contribution to a budget, aligned to a frequency grid.

    ``signed`` marks channels that are not spectra on their own (the
    imprecision-backaction correlation term) and may go negative.
    """

    name: str
    values: np.ndarray
    signed: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not self.signed and np.any(self.values < 0):
            raise DomainError(f"channel {self.name} has negative spectral density")

    def amplitude(self) -> np.ndarray:
        """Amplitude spectral density in N/√Hz (sign carried for signed channels)."""
        return np.sign(self.values) * np.sqrt(np.abs(self.values))


def _values(response) -> np.ndarray:
    if isinstance(response, ComplexResponse):
        return response.value
    return np.asarray(response, dtype=complex)


def _scalar(result):
    result = np.asarray(result)
    return result if result.ndim else result.item()


def _sideband_occupation(detuning, T: float, hbar: float, k_b: float):
    if T == 0:
        return np.zeros_like(detuning)
    with np.errstate(divide="ignore"):
        return bose_occupation(hbar * np.abs(detuning) / (k_b * T))


def sideband_weights(
    omega,
    cavity: CavityConfig,
    T: float,
    *,
    hbar: Optional[float] = None,
    k_b: Optional[float] = None,
    override: Optional[Weights] = None,
) -> Weights:
    """Thermal weights (n_th[|Ω−Ω_in|]+½, n_th[|Ω+Ω_in|]+½) of the two input sidebands.

    ``override`` replaces both weights, e.g. flat classical baths.
    """
    omega = np.asarray(omega, dtype=float)
    if override is not None:
        w_minus, w_plus = override
        return np.broadcast_to(np.asarray(w_minus, dtype=float), omega.shape), np.broadcast_to(
            np.asarray(w_plus, dtype=float), omega.shape
        )
    if T < 0:
        raise DomainError("temperature must be >= 0")
    c = constants()
    hbar = c.hbar if hbar is None else hbar
    k_b = c.k_B if k_b is None else k_b
    drive = cavity.drive
    w_minus = np.asarray(_sideband_occupation(omega - drive, T, hbar, k_b)) + 0.5
    w_plus = np.asarray(_sideband_occupation(omega + drive, T, hbar, k_b)) + 0.5
    return w_minus, w_plus


def s_ff_intrinsic(omega, m: float, gamma_eff: float, T: float, *, hbar: Optional[float] = None, k_b: Optional[float] = None):
    """Thermal plus zero-point force noise 2ℏmΩγ(n_th[Ω] + ½) of the damped oscillator."""
    if gamma_eff < 0:
        raise DomainError("gamma_eff must be >= 0")
    hbar = constants().hbar if hbar is None else hbar
    omega = np.asarray(omega, dtype=float)
    n = thermal_occupation(omega, T, hbar=hbar, k_b=k_b)
    return _scalar(2.0 * hbar * m * omega * gamma_eff * (np.asarray(n) + 0.5))


def s_ff_free_limit(omega, T: float):
    """Intrinsic noise of a free electron damped only by free-space Larmor radiation."""
    omega = np.asarray(omega, dtype=float)
    gamma = gamma_larmor_free(omega)
    n = thermal_occupation(omega, T)
    c = constants()
    return _scalar(2.0 * c.hbar * c.m_electron * omega * gamma * (np.asarray(n) + 0.5))


def s_ff_backaction_full(
    omega,
    cavity: CavityConfig,
    G: float,
    T: float,
    *,
    hbar: Optional[float] = None,
    weights: Optional[Weights] = None,
):
    """Stochastic radiation-pressure force from both input sidebands."""
    hbar = constants().hbar if hbar is None else hbar
    w_minus, w_plus = sideband_weights(omega, cavity, T, override=weights, hbar=hbar)
    chi_k = chi_cavity(omega, cavity)
    chi_bar = chi_cavity_counter(omega, cavity)
    return _scalar(hbar ** 2 * G ** 2 * cavity.kappa_in * (chi_k.abs2 * w_minus + chi_bar.abs2 * w_plus))


def s_ff_backaction_approx(
    omega,
    cavity: CavityConfig,
    G: float,
    T: float,
    *,
    hbar: Optional[float] = None,
    weights: Optional[Weights] = None,
):
    hbar = constants().hbar if hbar is None else hbar
    omega = np.asarray(omega, dtype=float)
    w_minus, _ = sideband_weights(omega, cavity, T, override=weights, hbar=hbar)
    lorentzian = 1.0 / ((omega - cavity.omega_k) ** 2 + (cavity.kappa / 2.0) ** 2)
    return _scalar(hbar ** 2 * G ** 2 * cavity.kappa_in * lorentzian * w_minus)


def _homodyne_denominator(chi_k: np.ndarray, chi_bar: np.ndarray, theta: float) -> np.ndarray:
    denominator = chi_k * np.exp(-1j * theta) - chi_bar * np.exp(1j * theta)
    scale = np.abs(chi_k) + np.abs(chi_bar)
    if np.any(np.abs(denominator) <= 1e-12 * scale):
        raise QuadratureSingular(f"homodyne quadrature theta = {theta:.6g} carries no motional signal")
    return denominator


def _check_theta(theta: float):
    if not 0.0 <= theta < 2.0 * math.pi:
        raise DomainError("theta must lie in [0, 2*pi)")


def s_ff_imprecision_full(
    omega,
    cavity: CavityConfig,
    G: float,
    chi_eff,
    theta: float,
    T: float,
    *,
    hbar: Optional[float] = None,
    weights: Optional[Weights] = None,
):
    """Shot noise of quadrature ``theta`` referred to force through G and χ_eff.

    Infinite when G = 0 (no transduction).
    """
    _check_theta(theta)
    omega = np.asarray(omega, dtype=float)
    chi_e = _values(chi_eff)
    w_minus, w_plus = sideband_weights(omega, cavity, T, override=weights, hbar=hbar)
    chi_k = chi_cavity(omega, cavity).value
    chi_bar = chi_cavity_counter(omega, cavity).value
    denominator = np.abs(_homodyne_denominator(chi_k, chi_bar, theta)) ** 2
    numerator = (
        np.abs(1.0 - chi_k * cavity.kappa_in) ** 2 * w_minus
        + np.abs(1.0 - chi_bar * cavity.kappa_in) ** 2 * w_plus
    )
    if G == 0:
        return _scalar(np.full(omega.shape, np.inf))
    return _scalar(numerator / (G ** 2 * cavity.kappa_in * np.abs(chi_e) ** 2 * denominator))


def s_ff_imprecision_approx(
    omega,
    cavity: CavityConfig,
    G: float,
    chi_eff,
    T: float,
    *,
    hbar: Optional[float] = None,
    weights: Optional[Weights] = None,
):
    """Phase-quadrature imprecision keeping the co-rotating sideband only."""
    omega = np.asarray(omega, dtype=float)
    chi_e = _values(chi_eff)
    w_minus, _ = sideband_weights(omega, cavity, T, override=weights, hbar=hbar)
    if G == 0:
        return _scalar(np.full(omega.shape, np.inf))
    detuning = (omega - cavity.omega_k) ** 2 + (cavity.kappa / 2.0) ** 2
    return _scalar(detuning * w_minus / (G ** 2 * cavity.kappa_in * np.abs(chi_e) ** 2))


def s_ff_cross_full(
    omega,
    cavity: CavityConfig,
    G: float,
    chi_eff,
    theta: float,
    T: float,
    *,
    hbar: Optional[float] = None,
    weights: Optional[Weights] = None,
):
    """Complex imprecision-backaction correlation; the budget uses 2·Re of it."""
    _check_theta(theta)
    hbar = constants().hbar if hbar is None else hbar
    omega = np.asarray(omega, dtype=float)
    if G == 0:
        return _scalar(np.zeros(omega.shape, dtype=complex))
    chi_e = _values(chi_eff)
    if np.any(chi_e == 0):
        raise SingularResponse("effective susceptibility vanishes on the grid")
    w_minus, w_plus = sideband_weights(omega, cavity, T, override=weights, hbar=hbar)
    chi_k = chi_cavity(omega, cavity).value
    chi_bar = chi_cavity_counter(omega, cavity).value
    denominator = _homodyne_denominator(chi_k, chi_bar, theta)
    numerator = (
        (1.0 - chi_k * cavity.kappa_in) * np.conj(chi_k) * np.exp(-1j * theta) * w_minus
        + (1.0 - chi_bar * cavity.kappa_in) * np.conj(chi_bar) * np.exp(1j * theta) * w_plus
    )
    return _scalar(1j * hbar / chi_e * numerator / denominator)


def s_ff_cross_approx(
    omega,
    cavity: CavityConfig,
    G: float,
    chi_eff,
    theta: float,
    T: float,
    *,
    hbar: Optional[float] = None,
    weights: Optional[Weights] = None,
):
    """Cross spectrum with the counter-rotating sideband dropped everywhere."""
    _check_theta(theta)
    hbar = constants().hbar if hbar is None else hbar
    omega = np.asarray(omega, dtype=float)
    if G == 0:
        return _scalar(np.zeros(omega.shape, dtype=complex))
    chi_e = _values(chi_eff)
    w_minus, _ = sideband_weights(omega, cavity, T, override=weights, hbar=hbar)
    chi_k = chi_cavity(omega, cavity).value
    return _scalar(1j * hbar / chi_e * (1.0 - chi_k * cavity.kappa_in) * np.conj(chi_k) / chi_k * w_minus)


def sql_bound(omega, chi_eff, *, hbar: Optional[float] = None):
    """Standard-quantum-limit floor ℏ/|χ_eff(Ω)| of the readout noise."""
    hbar = constants().hbar if hbar is None else hbar
    magnitude = np.abs(_values(chi_eff))
    if np.any(magnitude == 0) or not np.all(np.isfinite(magnitude)):
        raise SingularResponse("effective susceptibility is singular on the grid")
    return _scalar(hbar / magnitude)


def imprecision_backaction_product(
    omega,
    cavity: CavityConfig,
    G: float,
    chi_eff,
    T: float,
    *,
    full: bool = False,
    theta: float = math.pi / 2.0,
):
    """Displacement imprecision times backaction force, S_zz^imp·S_FF^ba."""
    chi_e = _values(chi_eff)
    if full:
        imprecision = s_ff_imprecision_full(omega, cavity, G, chi_e, theta, T)
        backaction = s_ff_backaction_full(omega, cavity, G, T)
    else:
        imprecision = s_ff_imprecision_approx(omega, cavity, G, chi_e, T)
        backaction = s_ff_backaction_approx(omega, cavity, G, T)
    return _scalar(np.asarray(imprecision) * np.abs(chi_e) ** 2 * np.asarray(backaction))


def s_ff_readout_additional(
    omega,
    cavity: CavityConfig,
    G: float,
    chi_eff,
    T: float,
    *,
    hbar: Optional[float] = None,
    k_b: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Backaction and imprecision from vacuum/thermal noise entering via internal loss.

    Phase-quadrature readout is assumed. Returns ``(ba_add, imp_add)``.
    """
    hbar = constants().hbar if hbar is None else hbar
    omega = np.asarray(omega, dtype=float)
    kappa_add = cavity.kappa_add
    if kappa_add == 0:
        zero = np.zeros(omega.shape)
        return _scalar(zero), _scalar(zero.copy())
    weight = np.asarray(thermal_occupation(omega, T, hbar=hbar, k_b=k_b)) + 0.5
    chi_k = chi_cavity(omega, cavity).value
    chi_bar = chi_cavity_counter(omega, cavity).value
    lorentz_sum = np.abs(chi_k) ** 2 + np.abs(chi_bar) ** 2
    ba_add = hbar ** 2 * G ** 2 * kappa_add * weight * lorentz_sum
    if G == 0:
        return _scalar(ba_add), _scalar(np.full(omega.shape, np.inf))
    chi_e = _values(chi_eff)
    imp_add = kappa_add * weight / (G ** 2 * np.abs(chi_e) ** 2) * lorentz_sum / np.abs(chi_k + chi_bar) ** 2
    return _scalar(ba_add), _scalar(imp_add)


def skin_depth(omega, resistivity: float):
    """Electromagnetic skin depth sqrt(2ρ/(μ0Ω))."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("skin depth needs omega > 0")
    return _scalar(np.sqrt(2.0 * resistivity / (constants().mu0 * omega)))


def _standoff(electrode: ElectrodeMaterial, z: Optional[float]) -> float:
    distance = z if z is not None else electrode.standoff_z
    if distance is None or not distance > 0:
        raise DomainError("electrode standoff distance must be positive")
    return distance


def s_ff_johnson(omega, electrode: ElectrodeMaterial, T: float, *, z: Optional[float] = None):
    """Johnson force noise of the endcap metal.

    The governing length is the skin depth for thick metal and t_metal
    otherwise; a particle closer than that length sees the 1/z³ branch.
    ``z`` overrides an unset ``electrode.standoff_z``.
    """
    omega = np.asarray(omega, dtype=float)
    distance = _standoff(electrode, z)
    c = constants()
    if electrode.resistivity == 0:
        return _scalar(np.zeros(omega.shape))
    delta = np.asarray(skin_depth(omega, electrode.resistivity))
    length = np.where(electrode.t_metal > delta, delta, electrode.t_metal)
    prefactor = 3.0 * c.e_charge ** 2 * c.k_B * T * electrode.resistivity / (2.0 * math.pi)
    far = prefactor / (distance ** 2 * length)
    near = prefactor / distance ** 3
    return _scalar(np.where(distance > length, far, near))


def s_ff_dielectric(omega, electrode: ElectrodeMaterial, T: float, *, z: Optional[float] = None):
    """Loss in a thin dielectric film on the electrodes; falls as 1/Ω."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("dielectric noise diverges at omega <= 0")
    distance = _standoff(electrode, z)
    c = constants()
    tan = electrode.loss_tangent_d
    loss = tan / (electrode.eps_dielectric * (1.0 + tan ** 2))
    return _scalar(
        3.0 * c.e_charge ** 2 * (3.0 / (4.0 * math.pi)) * loss * c.k_B * T * electrode.t_dielectric
        / (omega * distance ** 4)
    )


def magnetization_variance(magnet: MagnetMaterial, M_mean: float = 0.0, *, T: Optional[float] = None) -> float:
    """Mean-field variance of the magnetization driven by thermal spin flips.

    Zero at T = 0, where every spin is frozen.
    """
    T = magnet.T_mag if T is None else T
    if T < 0:
        raise DomainError("magnet temperature must be >= 0")
    c = constants()
    moment = c.mu_B * magnet.g_s / (2.0 * magnet.V_uc)
    if T == 0:
        return 0.0
    argument = 2.0 * magnet.V_uc * M_mean * magnet.T_c / (magnet.g_s * c.mu_B * T)
    with np.errstate(over="ignore"):
        denominator = magnet.T_c / T + np.cosh(argument) ** 2
    return float(moment ** 2 / denominator)


def s_bb_barkhausen(omega, magnet: MagnetMaterial, *, alpha: Optional[float] = None):
    """Radial field noise of the permanent magnet, a Lorentzian of width α around zero.

    ``alpha`` defaults to the upper end of ``magnet.alpha_decay``.
    """
    alpha = magnet.alpha_decay[1] if alpha is None else alpha
    if not alpha > 0:
        raise DomainError("alpha_decay must be positive")
    omega = np.asarray(omega, dtype=float)
    c = constants()
    T = magnet.T_mag
    field_scale = (magnet.g_s * c.mu0 * c.mu_B / (2.0 * magnet.V_uc)) ** 2
    return _scalar(field_scale * 2.0 * alpha / (omega ** 2 + alpha ** 2) * T / (T + magnet.T_c))


def mean_orbit(modes: ElectronModes, T: float, *, variant: str = "linear") -> Tuple[float, float]:
    """Mean radial coordinate ρ̄ and mean angular velocity Ω̄ of the thermal radial motion.

    ``variant="rms"`` puts the occupation factor inside the square root.
    """
    if not modes.stable:
        raise TrapUnstable(modes.omega_c, modes.omega_z)
    c = constants()
    n_plus = thermal_occupation(modes.omega_plus, T)
    n_minus = thermal_occupation(modes.omega_minus, T)
    occupancy = 1.0 + n_plus + n_minus
    ground = 2.0 * c.hbar / (c.m_electron * modes.omega_l)
    if variant == "linear":
        rho_bar = math.sqrt(ground) * occupancy
    elif variant == "rms":
        rho_bar = math.sqrt(ground * occupancy)
    else:
        raise DomainError(f"unknown orbit variant {variant!r}")
    omega_bar = c.hbar / c.m_electron * (n_plus - n_minus) / rho_bar ** 2
    return rho_bar, omega_bar


def s_ff_barkhausen(
    omega,
    magnet: MagnetMaterial,
    modes: ElectronModes,
    T: float,
    *,
    alpha: Optional[float] = None,
    variant: str = "linear",
):
    """Axial force from radial field noise acting on the thermal orbit current, |eΩ̄ρ̄|²·S_BB."""
    rho_bar, omega_bar = mean_orbit(modes, T, variant=variant)
    transduction = (constants().e_charge * omega_bar * rho_bar) ** 2
    return _scalar(transduction * np.asarray(s_bb_barkhausen(omega, magnet, alpha=alpha)))


def tls_loss_tangent_resonant(omega, tls: TlsMaterial, T: float):
    """Resonant TLS absorption; tends to P0p²π/(3ε0ε_r) as T → 0."""
    c = constants()
    omega = np.asarray(omega, dtype=float)
    strength = tls.P0 * tls.dipole_p ** 2 * math.pi / (3.0 * c.eps0 * tls.eps_r)
    if T == 0:
        return _scalar(np.full(omega.shape, strength))
    return _scalar(strength * np.tanh(c.hbar * omega / (2.0 * c.k_B * T)))


def tls_loss_tangent_relaxation(omega, tls: TlsMaterial, T: float):
    """Relaxation TLS absorption integrated over relaxation times up to ``t_exp``.

    Integrated in u = ln(τ_min/τ), where the integrand is smooth.
    """
    if not T > 0:
        raise DomainError("relaxation loss tangent needs T > 0")
    c = constants()
    scalar_input = np.ndim(omega) == 0
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(omega <= 0):
        raise DomainError("relaxation loss tangent needs omega > 0")
    tau_min = 1.0 / (tls.A_rate * T ** 3)
    if tls.t_exp <= tau_min:
        raise DomainError(f"t_exp = {tls.t_exp:.3g} s must exceed tau_min = {tau_min:.3g} s")
    a = omega * tau_min
    s_lower = tau_min / tls.t_exp
    # ∫ a/(s²+a²) ds over the same range bounds each integral; dividing by it keeps all entries O(1)
    scale = np.arctan(1.0 / a) - np.arctan(s_lower / a)

    def integrand(u):
        s = math.exp(u)
        return math.sqrt(-math.expm1(u)) * a * s / (s * s + a * a) / scale

    normalized, error = integrate.quad_vec(integrand, math.log(s_lower), 0.0, epsrel=1e-10, epsabs=0.0, norm="max")
    normalized = np.asarray(normalized)
    if error > TLS_QUAD_RTOL * np.min(normalized):
        raise IntegrationFailure(f"TLS relaxation quadrature did not converge (error estimate {error:.3g})")
    strength = tls.P0 * tls.dipole_p ** 2 / (c.eps0 * tls.eps_r)
    result = strength * normalized * scale
    return float(result[0]) if scalar_input else result


def tls_loss_tangent(omega, tls: TlsMaterial, T: float):
    """Total TLS loss tangent, resonant plus relaxation absorption."""
    resonant = np.asarray(tls_loss_tangent_resonant(omega, tls, T))
    relaxation = np.asarray(tls_loss_tangent_relaxation(omega, tls, T))
    return _scalar(resonant.reshape(relaxation.shape) + relaxation)


def s_ff_tls(
    omega,
    tls: TlsMaterial,
    cavity: CavityConfig,
    G: float,
    T: float,
    *,
    v_tls: Optional[float] = None,
):
    """Cavity field noise from TLS loss, converted to force by the coupling (ℏG/𝓔_zp)².

    ``v_tls`` is the TLS volume used when ``tls.V_tls`` is unset.
    """
    volume = tls.V_tls if tls.V_tls is not None else v_tls
    if volume is None or not volume > 0:
        raise DomainError("TLS volume must be given and positive")
    c = constants()
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("TLS noise needs omega > 0")
    if T == 0:
        return _scalar(np.zeros(omega.shape))
    tan_delta = np.abs(np.asarray(tls_loss_tangent(omega, tls, T)))
    s_ee = (
        2.0 * c.k_B * T / omega
        / (c.eps0 * tls.eps_r * volume)
        * tan_delta / ((1.0 - 1.0 / tls.eps_r) ** 2 + tan_delta ** 2)
    )
    prefactor = (c.hbar * G / zero_point_field(cavity)) ** 2
    return _scalar(prefactor * s_ee)
