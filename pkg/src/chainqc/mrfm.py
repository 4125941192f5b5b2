"""Force-microscopy readout and scalability models.

Covers the effective-pure-state magnetization (evaluated in log space so
large qubit counts do not overflow), the gradient readout force, cantilever
thermal force noise, the measurable-qubit and required-field curves, the
gate-budget model, and a single-spin simulation of cyclic adiabatic
inversion (CAI) readout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import HBAR, KB, TWO_PI
from .errors import ConfigError, ConvergenceError

__all__ = [
    "CantileverModel",
    "ScalabilityParams",
    "CAIParams",
    "CAIResult",
    "effective_pure_magnetization",
    "high_temp_magnetization",
    "readout_force",
    "thermal_force_noise",
    "force_at_n",
    "max_measurable_qubits",
    "required_field_over_temp",
    "gate_budget",
    "GateBudget",
    "cai_detuning",
    "simulate_cai_readout",
]

DEFAULT_GAMMA = TWO_PI * 40e6          # 19F, rad/s/T
DEFAULT_FORCE_THRESHOLD = 5.6e-18      # N (reported 4 K resolution x 1 Hz)


@dataclass(frozen=True)
class CantileverModel:
    spring_constant: float   # N/m
    resonance_freq: float    # Hz
    quality: float
    temperature: float       # K
    bandwidth: float = 1.0   # Hz

    def __post_init__(self):
        for name in ("spring_constant", "resonance_freq", "quality",
                     "temperature", "bandwidth"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass(frozen=True)
class ScalabilityParams:
    B0: float = 7.0                    # T
    temperature: float = 4.0           # K
    N: float = 1e7                     # equivalent-frequency copies per plane
    n: int = 10                        # qubits (planes)
    grad: float = 1.4e6                # T/m
    gamma: float = DEFAULT_GAMMA       # rad/s/T
    T2_0: float = 0.1                  # s
    L: float = 16.0                    # decoupling block length
    delta_omega: float = DEFAULT_GAMMA * 3.442e-10 * 1.4e6  # rad/s
    force_threshold: float = DEFAULT_FORCE_THRESHOLD        # N/sqrt(Hz)
    bandwidth: float = 1.0             # Hz

    def __post_init__(self):
        for name in ("B0", "temperature", "N", "grad", "gamma", "T2_0",
                     "L", "delta_omega", "force_threshold", "bandwidth"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.n < 1:
            raise ConfigError("n must be at least 1")

    @property
    def field_over_temp(self) -> float:
        return self.B0 / self.temperature

    @property
    def detection_threshold(self) -> float:
        """Force threshold for the configured bandwidth (N)."""
        return self.force_threshold * math.sqrt(self.bandwidth)


@dataclass(frozen=True)
class CAIParams:
    """Cyclic-adiabatic-inversion drive parameters."""

    b1: float                # T
    omega_m: float           # rad/s, modulation frequency
    excursion: float         # rad/s, peak detuning Omega
    duration: float          # s, must be an integer number of periods
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if self.b1 < 0:
            raise ConfigError("b1 must be non-negative")
        for name in ("omega_m", "excursion", "duration", "gamma"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def omega_1(self) -> float:
        return self.gamma * self.b1

    @property
    def adiabaticity(self) -> float:
        return self.omega_1**2 / (self.excursion * self.omega_m)

    def excursion_warning(self, delta_omega: float) -> str | None:
        """The excursion should stay well below the plane splitting."""
        if self.excursion >= 0.5 * delta_omega:
            return (f"frequency excursion {self.excursion:.3e} rad/s is not "
                    f"small compared to the plane splitting "
                    f"{delta_omega:.3e} rad/s")
        return None


def _log_sinh(y: float) -> float:
    """log(sinh(y)) for y > 0, overflow-safe."""
    if y <= 0:
        raise ConfigError("log sinh requires positive argument")
    if y < 20:
        return math.log(math.sinh(y))
    return y - math.log(2.0) + math.log1p(-math.exp(-2.0 * y))


def _log_cosh(x: float) -> float:
    return abs(x) - math.log(2.0) + math.log1p(math.exp(-2.0 * abs(x)))


def effective_pure_magnetization(p: ScalabilityParams) -> float:
    """Usable effective-pure-state magnetization M^z (J/T).

    M^z = gamma*hbar*(N/2^n) * sinh(n*x)/cosh^n(x), x = hbar*gamma*B0/(2*kB*T),
    evaluated in log space.
    """
    x = HBAR * p.gamma * p.B0 / (2.0 * KB * p.temperature)
    ln_m = (math.log(p.gamma * HBAR * p.N) - p.n * math.log(2.0)
            + _log_sinh(p.n * x) - p.n * _log_cosh(x))
    return math.exp(ln_m)


def high_temp_magnetization(p: ScalabilityParams) -> float:
    """High-temperature limit (gamma^2 hbar^2 B0 / 2 kB T) * N * n * 2^-n."""
    return (p.gamma**2 * HBAR**2 * p.B0 / (2.0 * KB * p.temperature)
            * p.N * p.n * math.exp(-p.n * math.log(2.0)))


def readout_force(mz: float, grad: float) -> float:
    """Gradient force F = M^z * |grad B^z| (N)."""
    if not (math.isfinite(mz) and math.isfinite(grad)):
        raise ConfigError("readout_force requires finite inputs")
    return mz * abs(grad)


def thermal_force_noise(c: CantileverModel) -> float:
    """Thermal force noise density sqrt(4 k kB T / (2 pi f0 Q)) (N/sqrt(Hz))."""
    return math.sqrt(4.0 * c.spring_constant * KB * c.temperature
                     / (TWO_PI * c.resonance_freq * c.quality))


def force_at_n(p: ScalabilityParams, n: int) -> float:
    return readout_force(effective_pure_magnetization(replace(p, n=n)), p.grad)


_N_SCAN_CAP = 100_000


def max_measurable_qubits(p: ScalabilityParams) -> int:
    """Largest n whose readout force clears the detection threshold.

    The force is eventually decreasing in n; after locating the decreasing
    branch by doubling, the answer is found by bisection.  Returns 0 when
    even the best n is below threshold.
    """
    thr = p.detection_threshold
    if force_at_n(p, 1) < thr:
        # The force can still peak above threshold at small n.
        best = 0
        for n in range(2, 2000):
            f = force_at_n(p, n)
            if f >= thr:
                best = n
            elif best:
                break
            if f < thr * 1e-12:
                break
        if best == 0:
            return 0
    # Find hi with force < thr on the decreasing branch.
    lo = 1
    hi = 2
    while force_at_n(p, hi) >= thr:
        lo = hi
        hi *= 2
        if hi > _N_SCAN_CAP:
            raise ConvergenceError(
                f"measurable-qubit search exceeded n={_N_SCAN_CAP}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if force_at_n(p, mid) >= thr:
            lo = mid
        else:
            hi = mid
    return lo


def required_field_over_temp(n: int, p: ScalabilityParams,
                             bracket=(1e-6, 1e7)) -> float:
    """B0/T (T/K) at which n qubits are exactly measurable.

    Solves readout_force = threshold by bisection; the force is monotone
    increasing in B0/T at fixed n.
    """
    if n < 1:
        raise ConfigError("n must be at least 1")
    thr = p.detection_threshold

    def f(bt: float) -> float:
        q = replace(p, B0=bt, temperature=1.0, n=n)
        return readout_force(effective_pure_magnetization(q), p.grad) - thr

    lo, hi = bracket
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise ConvergenceError(
            f"no B0/T bracket for n={n}: f({lo:.3e})={flo:.3e}, "
            f"f({hi:.3e})={fhi:.3e}")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if f(mid) >= 0:
            hi = mid
        else:
            lo = mid
        if hi / lo < 1 + 1e-12:
            break
    return math.sqrt(lo * hi)


@dataclass(frozen=True)
class GateBudget:
    budget: float          # T2_0 / t_c(n)
    budget_times_l: float  # T2_0 * delta_omega / n^2, independent of L
    cycle_time: float      # s


def gate_budget(p: ScalabilityParams) -> GateBudget:
    """Number of gates fitting into the decoherence time at qubit count n."""
    from .pulses import cycle_time_model
    t_c = cycle_time_model(p.n, p.L, p.delta_omega)
    return GateBudget(
        budget=p.T2_0 / t_c,
        budget_times_l=p.T2_0 * p.delta_omega / (p.n * p.n),
        cycle_time=t_c,
    )


def cai_detuning(params: CAIParams, t: float) -> float:
    """Instantaneous detuning of the CAI drive from resonance (rad/s)."""
    return params.excursion * math.sin(params.omega_m * t)


@dataclass(frozen=True)
class CAIResult:
    times: np.ndarray            # s
    iz: np.ndarray               # <Iz>(t)
    detuning: np.ndarray         # rad/s at the sample times
    following_figure: float      # min |<Iz>| / adiabatic prediction
    modulation_amplitude: float  # Fourier amplitude of <Iz> at omega_m
    norm_drift: float            # max | ||psi|| - 1 | over the trace
    warning: str | None = None


def simulate_cai_readout(params: CAIParams, initial: str = "up",
                         steps_per_period: int = 4000,
                         delta_omega: float | None = None) -> CAIResult:
    """Single-spin cyclic adiabatic inversion trace.

    H(t) = -[Delta(t) Iz + omega_1 Ix] with Delta(t) = Omega*cos(omega_m*t):
    the modulation starts at peak detuning so the effective field is nearly
    axial at t=0, and the spin starts in the adiabatic state of H(0) whose
    <Iz> sign matches ``initial`` (the turn-on at peak detuning models the
    adiabatic half passage that locks the thermal magnetization to the
    effective field).  The adiabatic-following figure compares |<Iz>(t)|
    against the locked-spin prediction (1/2)|Delta|/sqrt(Delta^2+omega_1^2)
    wherever that prediction exceeds 0.1.
    """
    if initial not in ("up", "down"):
        raise ConfigError("initial must be 'up' or 'down'")
    period = TWO_PI / params.omega_m
    n_periods = params.duration / period
    if abs(n_periods - round(n_periods)) > 1e-9 or round(n_periods) < 1:
        raise ConfigError(
            "duration must be a positive integer number of modulation periods")
    n_periods = int(round(n_periods))
    w1 = params.omega_1
    Om = params.excursion
    w_eff_max = math.hypot(w1, Om)
    dt = min(period / steps_per_period, 0.1 / w_eff_max)
    n_steps = int(math.ceil(params.duration / dt))
    if n_steps <= 0:
        raise ConfigError("step-size underflow")
    dt = params.duration / n_steps

    # Initial state: eigenstate of H(0) (field in the x-z plane), with the
    # sign of <Iz> chosen by `initial`.  For b1 = 0 this is exactly |up>.
    d0 = Om  # Delta(0) = Omega (peak)
    theta = math.atan2(w1, d0)  # angle of the effective field from +z
    if initial == "up":
        psi = np.array([math.cos(theta / 2.0), math.sin(theta / 2.0)],
                       dtype=complex)
    else:
        # orthogonal (anti-aligned) eigenstate, <Iz> < 0 at t = 0
        psi = np.array([math.sin(theta / 2.0), -math.cos(theta / 2.0)],
                       dtype=complex)

    times = np.empty(n_steps)
    iz = np.empty(n_steps)
    det = np.empty(n_steps)
    norm_drift = 0.0
    for k in range(n_steps):
        tm = (k + 0.5) * dt
        delta = Om * math.cos(params.omega_m * tm)
        # exp(-i H dt) for H = -(delta Iz + w1 Ix) = v . sigma/2
        vx, vz = -w1, -delta
        nv = math.hypot(vx, vz)
        th = 0.5 * nv * dt
        c, s = math.cos(th), math.sin(th)
        ux, uz = vx / nv, vz / nv
        # U = c*I - i*s*(ux*sigma_x + uz*sigma_z)
        a = c - 1j * s * uz
        b = -1j * s * ux
        psi = np.array([a * psi[0] + b * psi[1],
                        b * psi[0] + np.conj(a) * psi[1]])
        t = (k + 1) * dt
        times[k] = t
        iz[k] = 0.5 * (abs(psi[0])**2 - abs(psi[1])**2)
        det[k] = Om * math.cos(params.omega_m * t)
        norm_drift = max(norm_drift, abs(np.linalg.norm(psi) - 1.0))

    pred = 0.5 * np.abs(det) / np.hypot(det, w1)
    mask = pred > 0.1
    if mask.any():
        following = float(np.min(np.abs(iz[mask]) / pred[mask]))
    else:
        following = math.nan
    # Fourier amplitude at omega_m over the integer number of periods.
    phase = np.exp(-1j * params.omega_m * times)
    amp = 2.0 * abs(np.sum(iz * phase)) / n_steps
    warning = (params.excursion_warning(delta_omega)
               if delta_omega is not None else None)
    return CAIResult(times=times, iz=iz, detuning=det,
                     following_figure=following,
                     modulation_amplitude=amp, norm_drift=norm_drift,
                     warning=warning)
