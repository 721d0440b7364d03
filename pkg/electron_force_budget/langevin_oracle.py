"""Time-domain check of the analytic readout chain.

Integrates the linear electron–cavity Langevin equations in natural units
(ℏ = m = k_B = 1) with classical noise of symmetrized strength n + ½ per
bath, estimates output spectra with Welch's method and compares them to
the closed-form spectra evaluated with the same flat bath weights.

Discretization is exact for the linear system: the one-step propagator and
the noise covariance come from a Van Loan matrix exponential, and the
recursion is run mode by mode with ``scipy.signal.lfilter``.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Dict, Literal, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, field_validator
from scipy import linalg, signal
from scipy.optimize import curve_fit

from .core_physics import bose_occupation, chi_cavity, chi_cavity_counter, chi_eff, dynamical_backaction
from .errors import GridMismatch, IntegrationFailure, NonFiniteState, StepTooLarge
from .models import CavityConfig
from .noise_spectra import (
    s_ff_backaction_full,
    s_ff_cross_full,
    s_ff_imprecision_full,
)
from .settings import get_settings

logger = logging.getLogger(__name__)

MAX_PHASE_PER_STEP = 0.1
BURN_IN_RELAXATIONS = 8.0
FIT_WINDOW_LINEWIDTHS = 4.0

# state order: z, p, Re a, Im a, Re W, Im W (W integrates the input noise)
N_STATE = 4
N_AUG = 6


class SimConfig(BaseModel):
    """Dimensionless oscillator–cavity parameters (frequencies in units of a reference rate)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    omega_z: float = 1.0
    omega_k: float = 1.25
    kappa_in: float = 0.1
    kappa_add: float = 0.0
    gamma: float = 0.01
    G: float = 0.05
    T_mech: float = 10.0
    T_cav: float = 0.0
    theta: float = math.pi / 2.0
    omega_in: Optional[float] = None
    dt: float = 0.04
    nperseg: int = 131072
    n_segments: int = 16
    n_trajectories: int = 64
    seed: int = 0
    frame: Literal["lab", "rotating"] = "lab"

    @field_validator("omega_z", "omega_k", "kappa_in", "dt")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not (value > 0 and math.isfinite(value)):
            raise ValueError("must be positive")
        return value

    @field_validator("kappa_add", "gamma", "G", "T_mech", "T_cav")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if not (value >= 0 and math.isfinite(value)):
            raise ValueError("must be >= 0")
        return value

    @field_validator("theta")
    @classmethod
    def _angle(cls, value: float) -> float:
        if not 0.0 <= value < 2.0 * math.pi:
            raise ValueError("must lie in [0, 2*pi)")
        return value

    @field_validator("n_trajectories")
    @classmethod
    def _trajectories(cls, value: int) -> int:
        if value < 8:
            raise ValueError("need at least 8 trajectories")
        return value

    @field_validator("nperseg", "n_segments")
    @classmethod
    def _segments(cls, value: int) -> int:
        if value < 2:
            raise ValueError("must be >= 2")
        return value

    @property
    def n_steps(self) -> int:
        """Recorded steps per trajectory: ``n_segments`` Welch segments at 50 % overlap."""
        return self.nperseg * (self.n_segments + 1) // 2

    @property
    def drive(self) -> float:
        return self.omega_k if self.omega_in is None else self.omega_in

    @property
    def kappa(self) -> float:
        return self.kappa_in + self.kappa_add

    @property
    def n_mech(self) -> float:
        return 0.0 if self.T_mech == 0 else bose_occupation(self.omega_z / self.T_mech)

    @property
    def n_cav(self) -> float:
        return 0.0 if self.T_cav == 0 else bose_occupation(self.omega_k / self.T_cav)

    def cavity(self) -> CavityConfig:
        return CavityConfig.from_rates(
            self.omega_k, self.kappa_in, self.kappa_add, omega_in=self.omega_in, theta_lo=self.theta
        )

    def fastest_scale(self) -> float:
        cavity_scale = abs(self.omega_k - self.drive) if self.frame == "rotating" else self.omega_k
        return max(self.omega_z, cavity_scale, self.kappa, self.gamma)


@dataclass
class LorentzFit:
    center: float
    linewidth: float
    center_err: float
    linewidth_err: float
    amplitude: float
    offset: float


@dataclass
class SimResult:
    """Trajectory-averaged spectra (two-sided, angular frequency) and the mechanical fit."""

    config: SimConfig
    omega: np.ndarray
    psd_z: np.ndarray
    psd_z_err: np.ndarray
    psd_q: np.ndarray
    psd_q_err: np.ndarray
    fit: LorentzFit
    z_variance: float
    z_variance_err: float

    @property
    def center(self) -> float:
        return self.fit.center

    @property
    def linewidth(self) -> float:
        return self.fit.linewidth


def _drift(sim: SimConfig) -> np.ndarray:
    A = np.zeros((N_AUG, N_AUG))
    A[0, 1] = 1.0
    A[1, 0] = -sim.omega_z ** 2
    A[1, 1] = -sim.gamma
    A[1, 2] = 2.0 * sim.G
    A[2, 2] = -sim.kappa / 2.0
    A[2, 3] = sim.omega_k
    A[3, 2] = -sim.omega_k
    A[3, 3] = -sim.kappa / 2.0
    A[3, 0] = sim.G
    return A


def _diffusion(sim: SimConfig) -> np.ndarray:
    """Noise intensity matrix; each complex port quadrature carries (n + ½)/2."""
    Q = np.zeros((N_AUG, N_AUG))
    Q[1, 1] = 2.0 * sim.gamma * sim.omega_z * (sim.n_mech + 0.5)
    port = (sim.n_cav + 0.5) / 2.0
    root_in = math.sqrt(sim.kappa_in)
    for field, integral in ((2, 4), (3, 5)):
        Q[field, field] = sim.kappa * port
        Q[field, integral] = Q[integral, field] = root_in * port
        Q[integral, integral] = port
    return Q


def discretize(sim: SimConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Exact one-step propagator Φ and noise covariance Q_d (Van Loan)."""
    A = _drift(sim)
    Q = _diffusion(sim)
    M = np.block([[-A, Q], [np.zeros_like(A), A.T]]) * sim.dt
    E = linalg.expm(M)
    phi = E[N_AUG:, N_AUG:].T
    q_d = phi @ E[:N_AUG, N_AUG:]
    return phi, 0.5 * (q_d + q_d.T)


def _noise_root(q_d: np.ndarray) -> np.ndarray:
    eigenvalues, vectors = linalg.eigh(q_d)
    return vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


def _trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


@dataclass(frozen=True)
class _Propagator:
    eigenvalues: np.ndarray
    modes: np.ndarray
    modes_inv: np.ndarray
    noise_root: np.ndarray
    burn_in: int


def _propagator(sim: SimConfig) -> _Propagator:
    phi, q_d = discretize(sim)
    eigenvalues, modes = linalg.eig(phi[:N_STATE, :N_STATE])
    magnitude = np.abs(eigenvalues)
    if not np.all(magnitude < 1.0):
        raise NonFiniteState(
            f"linear system is not damped: step eigenvalue moduli {np.round(magnitude, 8).tolist()}"
        )
    slowest = float(np.max(np.log(magnitude)))
    burn_in = int(math.ceil(BURN_IN_RELAXATIONS / -slowest))
    return _Propagator(eigenvalues, modes, linalg.inv(modes), _noise_root(q_d), burn_in)


def estimate_psd(x: np.ndarray, dt: float, nperseg: int) -> Tuple[np.ndarray, np.ndarray]:
    """Two-sided symmetrized PSD S̄(Ω) of a real signal on Ω ≥ 0 (Hann, 50 % overlap)."""
    f, one_sided = signal.welch(
        x, fs=1.0 / dt, window="hann", nperseg=nperseg, noverlap=nperseg // 2, detrend=False
    )
    return 2.0 * math.pi * f, one_sided / 2.0


def _run_trajectory(sim: SimConfig, index: int, prop: _Propagator) -> Tuple[np.ndarray, np.ndarray, float]:
    rng = _trajectory_rng(sim.seed, index)
    n_total = prop.burn_in + sim.n_steps
    xi = rng.standard_normal((n_total, N_AUG)) @ prop.noise_root.T

    eta = xi[:, :N_STATE] @ prop.modes_inv.T
    filtered = np.empty_like(eta)
    for k, lam in enumerate(prop.eigenvalues):
        filtered[:, k] = signal.lfilter([1.0], [1.0, -lam], eta[:, k])
    states = np.vstack([np.zeros(N_STATE), (filtered @ prop.modes.T).real])
    if not np.all(np.isfinite(states)):
        raise NonFiniteState(f"trajectory {index} produced non-finite states")

    start = prop.burn_in
    z = states[start + 1:, 0]
    a = states[start:, 2] + 1j * states[start:, 3]
    d_w = xi[start:, 4] + 1j * xi[start:, 5]
    a_out = d_w / sim.dt - math.sqrt(sim.kappa_in) * 0.5 * (a[:-1] + a[1:])
    if sim.frame == "rotating":
        t = sim.dt * np.arange(start, n_total)
        a_out = a_out * np.exp(1j * sim.drive * t)
    q = math.sqrt(2.0) * np.real(np.exp(-1j * sim.theta) * a_out)

    _, psd_z = estimate_psd(z, sim.dt, sim.nperseg)
    _, psd_q = estimate_psd(q, sim.dt, sim.nperseg)
    return psd_z, psd_q, float(np.mean(z * z))


def _lorentzian(x, center, linewidth, amplitude, offset):
    half = linewidth / 2.0
    return amplitude * half * half / ((x - center) ** 2 + half * half) + offset


def fit_lorentzian(
    omega: np.ndarray,
    psd: np.ndarray,
    sigma: Optional[np.ndarray] = None,
    *,
    window: float = FIT_WINDOW_LINEWIDTHS,
) -> LorentzFit:
    """Fit a Lorentzian plus constant around the highest peak of ``psd``."""
    peak = int(np.argmax(psd))
    half_max = 0.5 * psd[peak]
    left = peak
    while left > 0 and psd[left] > half_max:
        left -= 1
    right = peak
    while right < psd.size - 1 and psd[right] > half_max:
        right += 1
    width_guess = max(omega[right] - omega[left], 2.0 * (omega[1] - omega[0]))
    center_guess = omega[peak]

    mask = np.abs(omega - center_guess) <= window * width_guess
    if np.count_nonzero(mask) < 5:
        raise IntegrationFailure("too few spectral bins across the resonance to fit")
    x = omega[mask] - center_guess
    p0 = [0.0, width_guess, psd[peak], float(np.min(psd[mask]))]
    try:
        popt, pcov = curve_fit(
            _lorentzian,
            x,
            psd[mask],
            p0=p0,
            sigma=None if sigma is None else sigma[mask],
            absolute_sigma=sigma is not None,
            maxfev=20000,
        )
    except RuntimeError as e:
        raise IntegrationFailure(f"Lorentzian fit failed: {e}")
    errors = np.sqrt(np.diag(pcov))
    return LorentzFit(
        center=center_guess + popt[0],
        linewidth=abs(popt[1]),
        center_err=float(errors[0]),
        linewidth_err=float(errors[1]),
        amplitude=float(popt[2]),
        offset=float(popt[3]),
    )


def simulate(sim: SimConfig, *, n_jobs: Optional[int] = None) -> SimResult:
    """Run ``sim.n_trajectories`` independent trajectories and average their spectra."""
    scale = sim.fastest_scale()
    if sim.dt * scale >= MAX_PHASE_PER_STEP:
        raise StepTooLarge(f"dt * max frequency = {sim.dt * scale:.3g} must stay below {MAX_PHASE_PER_STEP}")
    n_jobs = get_settings().threads if n_jobs is None else n_jobs
    prop = _propagator(sim)
    logger.info(
        f"Simulating {sim.n_trajectories} trajectories x {sim.n_steps} steps "
        f"(burn-in {prop.burn_in}) in the {sim.frame} frame"
    )
    runs = Parallel(n_jobs=n_jobs)(delayed(_run_trajectory)(sim, i, prop) for i in range(sim.n_trajectories))

    n = sim.n_trajectories
    psd_z = np.stack([r[0] for r in runs])
    psd_q = np.stack([r[1] for r in runs])
    variances = np.array([r[2] for r in runs])
    omega = 2.0 * math.pi * np.fft.rfftfreq(sim.nperseg, d=sim.dt)
    mean_z = psd_z.mean(axis=0)
    err_z = psd_z.std(axis=0, ddof=1) / math.sqrt(n)
    # skip the DC bin, where the one-sided estimate is not doubled
    fit = fit_lorentzian(omega[1:], mean_z[1:], err_z[1:])
    logger.info(f"Mechanical fit: center {fit.center:.6f} +- {fit.center_err:.1e}, width {fit.linewidth:.6f}")
    return SimResult(
        config=sim,
        omega=omega,
        psd_z=mean_z,
        psd_z_err=err_z,
        psd_q=psd_q.mean(axis=0),
        psd_q_err=psd_q.std(axis=0, ddof=1) / math.sqrt(n),
        fit=fit,
        z_variance=float(variances.mean()),
        z_variance_err=float(variances.std(ddof=1) / math.sqrt(n)),
    )


def _flat_weights(sim: SimConfig) -> Tuple[float, float]:
    level = sim.n_cav + 0.5
    return level, level


def analytic_mechanics(sim: SimConfig) -> Tuple[float, float]:
    """Predicted peak center Ω_z + Ω_ba and linewidth γ + γ_ba."""
    if sim.G == 0:
        return sim.omega_z, sim.gamma
    omega_ba, gamma_ba = dynamical_backaction(sim.omega_z, sim.cavity(), sim.G, 1.0, hbar=1.0)
    return sim.omega_z + omega_ba, sim.gamma + gamma_ba


def analytic_z_psd(sim: SimConfig, omega: np.ndarray) -> np.ndarray:
    """Displacement spectrum |χ_eff|²·(S_int + S_ba) with flat bath weights."""
    omega = np.asarray(omega, dtype=float)
    cavity = sim.cavity()
    chi = chi_eff(omega, sim.omega_z, sim.gamma, cavity, sim.G, 1.0, hbar=1.0)
    s_int = 2.0 * sim.gamma * sim.omega_z * (sim.n_mech + 0.5)
    s_ba = s_ff_backaction_full(omega, cavity, sim.G, sim.T_cav, hbar=1.0, weights=_flat_weights(sim))
    return chi.abs2 * (s_int + np.asarray(s_ba))


def analytic_output_psd(sim: SimConfig, omega: np.ndarray) -> np.ndarray:
    """Symmetrized spectrum of q_θ = (e^{-iθ}a_out + e^{iθ}a_out†)/√2.

    The input port enters through the force-referred budget channels; the
    internal-loss port is added from its exact transfer function.
    """
    omega = np.asarray(omega, dtype=float)
    cavity = sim.cavity()
    weights = _flat_weights(sim)
    chi = chi_eff(omega, sim.omega_z, sim.gamma, cavity, sim.G, 1.0, hbar=1.0).value
    chi_k = chi_cavity(omega, cavity).value
    chi_bar = chi_cavity_counter(omega, cavity).value
    theta = sim.theta
    transfer = chi_k * np.exp(-1j * theta) - chi_bar * np.exp(1j * theta)

    if sim.G == 0:
        w_minus, w_plus = weights
        spectrum = 0.5 * (
            np.abs(1.0 - cavity.kappa_in * chi_k) ** 2 * w_minus
            + np.abs(1.0 - cavity.kappa_in * chi_bar) ** 2 * w_plus
        )
    else:
        s_int = 2.0 * sim.gamma * sim.omega_z * (sim.n_mech + 0.5)
        s_ba = s_ff_backaction_full(omega, cavity, sim.G, sim.T_cav, hbar=1.0, weights=weights)
        s_imp = s_ff_imprecision_full(omega, cavity, sim.G, chi, theta, sim.T_cav, hbar=1.0, weights=weights)
        s_cross = s_ff_cross_full(omega, cavity, sim.G, chi, theta, sim.T_cav, hbar=1.0, weights=weights)
        force = s_int + np.asarray(s_ba) + np.asarray(s_imp) + 2.0 * np.real(s_cross)
        spectrum = 0.5 * sim.G ** 2 * cavity.kappa_in * np.abs(transfer) ** 2 * np.abs(chi) ** 2 * force

    if cavity.kappa_add > 0:
        coupling = 1j * sim.G ** 2 * transfer * chi
        root = math.sqrt(cavity.kappa_in * cavity.kappa_add)
        direct = np.abs(root * chi_k * (np.exp(-1j * theta) + coupling)) ** 2
        image = np.abs(root * chi_bar * (np.exp(1j * theta) + coupling)) ** 2
        spectrum = spectrum + 0.5 * (sim.n_cav + 0.5) * (direct + image)
    return spectrum


def compare_to_analytic(
    result: SimResult,
    analytic: Optional[SimConfig] = None,
    *,
    tolerance: float = 0.1,
) -> Dict:
    """Ratio of simulated to analytic output spectrum across the half-power band.

    ``analytic`` defaults to the simulated parameters; passing different
    ones is how mismatches are detected.
    """
    analytic = result.config if analytic is None else analytic
    if result.config.frame != "lab" or analytic.frame != "lab":
        raise GridMismatch("analytic output spectra are lab-frame; rotating-frame envelopes are not comparable")
    center, linewidth = analytic_mechanics(analytic)
    band = (center - linewidth / 2.0, center + linewidth / 2.0)
    mask = (result.omega >= band[0]) & (result.omega <= band[1])
    if np.count_nonzero(mask) < 3:
        raise GridMismatch(
            f"only {np.count_nonzero(mask)} spectral bins inside the half-power band; lengthen nperseg"
        )
    expected = analytic_output_psd(analytic, result.omega[mask])
    ratios = result.psd_q[mask] / expected
    deviation = float(np.max(np.abs(ratios - 1.0)))
    passed = deviation <= tolerance
    report = {
        "passed": bool(passed),
        "tolerance": tolerance,
        "max_abs_deviation": deviation,
        "band": [float(band[0]), float(band[1])],
        "n_bins": int(np.count_nonzero(mask)),
        "ratios": [float(r) for r in ratios],
        "mechanics": {
            "center_fit": result.fit.center,
            "center_err": result.fit.center_err,
            "center_analytic": center,
            "linewidth_fit": result.fit.linewidth,
            "linewidth_err": result.fit.linewidth_err,
            "linewidth_analytic": linewidth,
        },
        "z_variance": {"simulated": result.z_variance, "error": result.z_variance_err},
        "config": result.config.model_dump(mode="json"),
        "analytic_config": analytic.model_dump(mode="json"),
    }
    log = logger.info if passed else logger.warning
    log(f"Oracle comparison {'passed' if passed else 'FAILED'}: max deviation {deviation:.3f} over {report['n_bins']} bins")
    return report


def report_json(report: Dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
