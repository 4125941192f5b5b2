"""Exact quantum dynamics of small planes x chains spin-1/2 registers.

The register is laid out as n_planes stacked along z (spacing a, per-plane
frequency offsets from the field gradient) times n_chains at fixed
transverse positions.  Spin index = plane * n_chains + chain.

Couplings between different planes are secular zz terms; couplings within a
plane (equal resonance frequency) keep the full dipolar form
(1/2) c (3 Iz Iz - I.I).  All coefficients are angular frequencies (rad/s);
free evolution is U = exp(-i H t) with H in rad/s.

Pulse rotation convention: a pulse of flip angle theta and phase phi applies
U = exp(+i theta (cos(phi) Ix + sin(phi) Iy)) on its targets (phase 0 = x,
pi/2 = y).  With this convention the WAHUHA cycle scales offsets along
+(1,1,1)/sqrt(3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .constants import HBAR, MU0_OVER_4PI
from .errors import ConfigError, SequenceValidationError
from .lattice import ChainLattice, splitting

__all__ = [
    "MAX_SPINS",
    "Coupling",
    "SpinSystem",
    "QuantumState",
    "Propagator",
    "build_system",
    "evolve",
    "propagator",
    "expectation_iz_plane",
    "gate_fidelity",
    "diagonal_z_fidelity",
    "average_hamiltonian_0",
]

MAX_SPINS = 12

SX = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)
SY = np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex)
SZ = np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

UP = np.array([1.0, 0.0], dtype=complex)
DOWN = np.array([0.0, 1.0], dtype=complex)


def single_spin_op(n_spins: int, index: int, op: np.ndarray) -> np.ndarray:
    """Embed a single-spin operator at position ``index`` in an n-spin space."""
    out = np.array([[1.0 + 0.0j]])
    for k in range(n_spins):
        out = np.kron(out, op if k == index else ID2)
    return out


class Coupling(NamedTuple):
    i: int              # spin index
    j: int              # spin index
    kind: str           # 'zz' or 'full_dipolar'
    coeff: float        # rad/s


@dataclass(frozen=True)
class SpinSystem:
    n_planes: int
    chain_positions: tuple[tuple[float, float], ...]  # units of a
    offsets: tuple[float, ...]                        # rad/s, per plane
    couplings: tuple[Coupling, ...]

    def __post_init__(self):
        if self.total_spins > MAX_SPINS:
            raise ConfigError(
                f"{self.total_spins} spins exceeds the cap of {MAX_SPINS}")
        if len(self.offsets) != self.n_planes:
            raise ConfigError("need one offset per plane")
        seen = set()
        for c in self.couplings:
            if c.i == c.j:
                raise ConfigError("self-coupling in coupling table")
            if (min(c.i, c.j), max(c.i, c.j)) in seen:
                raise ConfigError("duplicate pair in coupling table")
            seen.add((min(c.i, c.j), max(c.i, c.j)))

    @property
    def n_chains(self) -> int:
        return len(self.chain_positions)

    @property
    def total_spins(self) -> int:
        return self.n_planes * self.n_chains

    @property
    def dim(self) -> int:
        return 2 ** self.total_spins

    def spin_index(self, plane: int, chain: int) -> int:
        return plane * self.n_chains + chain

    def plane_of(self, spin: int) -> int:
        return spin // self.n_chains

    def plane_spins(self, plane: int) -> list[int]:
        if not 0 <= plane < self.n_planes:
            raise ConfigError(f"plane {plane} out of range")
        return [self.spin_index(plane, c) for c in range(self.n_chains)]

    def hamiltonian(self) -> np.ndarray:
        """Internal Hamiltonian (rad/s) in the plane-0 rotating frame."""
        n = self.total_spins
        H = np.zeros((self.dim, self.dim), dtype=complex)
        for p in range(self.n_planes):
            w = self.offsets[p]
            if w == 0.0:
                continue
            for s in self.plane_spins(p):
                H += w * single_spin_op(n, s, SZ)
        for c in self.couplings:
            zz = single_spin_op(n, c.i, SZ) @ single_spin_op(n, c.j, SZ)
            if c.kind == "zz":
                H += c.coeff * zz
            elif c.kind == "full_dipolar":
                xx = single_spin_op(n, c.i, SX) @ single_spin_op(n, c.j, SX)
                yy = single_spin_op(n, c.i, SY) @ single_spin_op(n, c.j, SY)
                H += 0.5 * c.coeff * (3.0 * zz - (xx + yy + zz))
            else:
                raise ConfigError(f"unknown coupling kind {c.kind!r}")
        return H


class QuantumState:
    """Pure state vector or density operator on the register."""

    def __init__(self, kind: str, data: np.ndarray):
        data = np.asarray(data, dtype=complex)
        if kind == "pure":
            if data.ndim != 1:
                raise ConfigError("pure state must be a vector")
            if abs(np.linalg.norm(data) - 1.0) > 1e-10:
                raise ConfigError("pure state must have unit norm")
        elif kind == "density":
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise ConfigError("density operator must be square")
            if np.max(np.abs(data - data.conj().T)) > 1e-10:
                raise ConfigError("density operator must be Hermitian")
            if abs(np.trace(data).real - 1.0) > 1e-10:
                raise ConfigError("density operator must have unit trace")
            if np.min(np.linalg.eigvalsh(data)) < -1e-10:
                raise ConfigError("density operator must be positive")
        else:
            raise ConfigError(f"unknown state kind {kind!r}")
        self.kind = kind
        self.data = data

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @classmethod
    def pure(cls, vec) -> "QuantumState":
        return cls("pure", vec)

    @classmethod
    def density(cls, rho) -> "QuantumState":
        return cls("density", rho)

    @classmethod
    def product(cls, single_states: Iterable[np.ndarray]) -> "QuantumState":
        vec = np.array([1.0 + 0.0j])
        for s in single_states:
            vec = np.kron(vec, np.asarray(s, dtype=complex))
        return cls.pure(vec / np.linalg.norm(vec))

    @classmethod
    def all_up(cls, n_spins: int) -> "QuantumState":
        return cls.product([UP] * n_spins)

    @classmethod
    def all_plus_x(cls, n_spins: int) -> "QuantumState":
        plus = (UP + DOWN) / math.sqrt(2.0)
        return cls.product([plus] * n_spins)

    @classmethod
    def maximally_mixed(cls, n_spins: int) -> "QuantumState":
        d = 2 ** n_spins
        return cls.density(np.eye(d) / d)

    def apply(self, U: np.ndarray) -> "QuantumState":
        if self.kind == "pure":
            v = U @ self.data
            return QuantumState.pure(v / np.linalg.norm(v))
        rho = U @ self.data @ U.conj().T
        rho = 0.5 * (rho + rho.conj().T)
        return QuantumState.density(rho / np.trace(rho).real)

    def expectation(self, op: np.ndarray) -> float:
        if self.kind == "pure":
            return float(np.real(self.data.conj() @ op @ self.data))
        return float(np.real(np.trace(op @ self.data)))

    def fidelity_to(self, other: "QuantumState") -> float:
        if self.kind == "pure" and other.kind == "pure":
            return float(abs(np.vdot(other.data, self.data)) ** 2)
        raise ConfigError("fidelity_to implemented for pure states only")


@dataclass(frozen=True)
class Propagator:
    matrix: np.ndarray

    def __post_init__(self):
        U = self.matrix
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise ConfigError("propagator must be square")
        err = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
        if err > 1e-9:
            raise ConfigError(f"propagator not unitary (deviation {err:.2e})")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def build_system(lat: ChainLattice, n_planes: int, chain_positions,
                 grad: float, include_same_plane: bool = True) -> SpinSystem:
    """Assemble a SpinSystem from crystal geometry and a field gradient.

    Offsets are omega_p = p * gamma*a*|grad| relative to plane 0.  Every
    pairwise coefficient is evaluated from the full 3D separation vector;
    same-plane pairs keep the full dipolar form (optionally dropped via
    ``include_same_plane`` to isolate cross-chain zz effects).
    """
    positions = [tuple(float(c) for c in p) for p in chain_positions]
    if len(set(positions)) != len(positions):
        raise ConfigError("duplicate chain positions")
    n_chains = len(positions)
    if n_planes < 1 or n_chains < 1:
        raise ConfigError("need at least one plane and one chain")
    if n_planes * n_chains > MAX_SPINS:
        raise ConfigError(
            f"{n_planes * n_chains} spins exceeds the cap of {MAX_SPINS}")
    dw = splitting(lat, grad)
    offsets = tuple(p * dw for p in range(n_planes))
    base = MU0_OVER_4PI * lat.gamma**2 * HBAR
    couplings = []
    def spin(p, c):
        return p * n_chains + c
    for p1 in range(n_planes):
        for c1 in range(n_chains):
            for p2 in range(n_planes):
                for c2 in range(n_chains):
                    s1, s2 = spin(p1, c1), spin(p2, c2)
                    if s2 <= s1:
                        continue
                    dxy = (np.array(positions[c2]) - np.array(positions[c1])) * lat.a
                    dz = (p2 - p1) * lat.a
                    r = math.sqrt(dxy[0]**2 + dxy[1]**2 + dz**2)
                    cos2 = (dz / r) ** 2
                    coeff = base * (1.0 - 3.0 * cos2) / r**3
                    if p1 == p2:
                        if include_same_plane:
                            couplings.append(Coupling(s1, s2, "full_dipolar", coeff))
                    else:
                        couplings.append(Coupling(s1, s2, "zz", coeff))
    return SpinSystem(
        n_planes=n_planes,
        chain_positions=tuple(positions),
        offsets=offsets,
        couplings=tuple(couplings),
    )


def _expm_herm(H: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) for Hermitian H via eigendecomposition."""
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def _pulse_generator(sys: SpinSystem, event) -> np.ndarray:
    """Hermitian generator G with ideal pulse U = exp(+i * flip_angle * G)."""
    n = sys.total_spins
    if event.target == "broadband":
        spins = range(n)
    else:
        spins = sys.plane_spins(event.target)
    G = np.zeros((sys.dim, sys.dim), dtype=complex)
    ax = math.cos(event.phase)
    ay = math.sin(event.phase)
    for s in spins:
        G += ax * single_spin_op(n, s, SX) + ay * single_spin_op(n, s, SY)
    return G


def _ideal_pulse_unitary(sys: SpinSystem, event) -> np.ndarray:
    return _expm_herm(_pulse_generator(sys, event), -event.flip_angle)


def _sampled_pulse_unitary(sys: SpinSystem, H: np.ndarray, event) -> np.ndarray:
    """Finite-duration pulse as a rotating-wave drive on every spin.

    The drive oscillates at the target plane's offset (0 for broadband), so
    spins in other planes see it off-resonance; selectivity is physical, not
    imposed.
    """
    n = sys.total_spins
    w1 = event.flip_angle / event.duration
    wd = 0.0 if event.target == "broadband" else sys.offsets[event.target]
    max_off = max((abs(a - b) for a in sys.offsets for b in sys.offsets),
                  default=0.0)
    dt = event.duration / 10.0
    if max_off > 0:
        dt = min(dt, 1.0 / (20.0 * max_off))
    n_steps = max(1, int(math.ceil(event.duration / dt)))
    dt = event.duration / n_steps
    if dt <= 0:
        raise ConfigError("sampled-pulse step underflow")
    sx_all = sum(single_spin_op(n, s, SX) for s in range(n))
    sy_all = sum(single_spin_op(n, s, SY) for s in range(n))
    U = np.eye(sys.dim, dtype=complex)
    for k in range(n_steps):
        t = event.t_start + (k + 0.5) * dt
        ph = wd * t + event.phase
        Hd = -w1 * (math.cos(ph) * sx_all + math.sin(ph) * sy_all)
        U = _expm_herm(H + Hd, dt) @ U
    return U


def _walk(sys: SpinSystem, seq, mode: str):
    """Yield (time, U_segment) pieces covering the sequence timeline."""
    if mode not in ("ideal", "sampled"):
        raise ConfigError(f"unknown mode {mode!r}")
    H = sys.hamiltonian()
    events = list(seq.events)
    if mode == "sampled":
        intervals = [(e.t_start, e.t_start + e.duration) for e in events
                     if e.duration > 0]
        intervals.sort()
        for (a0, a1), (b0, b1) in zip(intervals, intervals[1:]):
            if b0 < a1:
                raise SequenceValidationError(
                    "overlapping finite-duration events in sampled mode",
                    offenders=[(a0, a1), (b0, b1)])
    t = 0.0
    for ev in events:
        gap = ev.t_start - t
        if gap < -1e-15:
            raise SequenceValidationError("events out of order", [ev])
        if gap > 0:
            yield ev.t_start, _expm_herm(H, gap)
        if mode == "ideal" or ev.duration == 0.0:
            yield ev.t_start + ev.duration, _ideal_pulse_unitary(sys, ev)
        else:
            yield ev.t_start + ev.duration, _sampled_pulse_unitary(sys, H, ev)
        t = ev.t_start + ev.duration
    if seq.cycle_time > t:
        yield seq.cycle_time, _expm_herm(H, seq.cycle_time - t)


def evolve(sys: SpinSystem, seq, state: QuantumState, mode: str = "ideal"):
    """Propagate a state through a sequence.

    Returns a list of (time, QuantumState) at t=0 and after every segment
    (free window or pulse).
    """
    if state.dim != sys.dim:
        raise ConfigError("state dimension does not match the system")
    out = [(0.0, state)]
    cur = state
    for t, U in _walk(sys, seq, mode):
        cur = cur.apply(U)
        out.append((t, cur))
    return out


def propagator(sys: SpinSystem, seq, mode: str = "ideal") -> Propagator:
    """Total unitary of the sequence (composed left-to-right in time)."""
    U = np.eye(sys.dim, dtype=complex)
    for _, Useg in _walk(sys, seq, mode):
        U = Useg @ U
    return Propagator(U)


def expectation_iz_plane(sys: SpinSystem, state: QuantumState,
                         plane: int) -> float:
    """Sum of <Iz> over the chains of one plane."""
    n = sys.total_spins
    op = sum(single_spin_op(n, s, SZ) for s in sys.plane_spins(plane))
    return state.expectation(op)


def gate_fidelity(actual: Propagator, target: Propagator) -> float:
    """|Tr(target^dag actual)| / d, invariant under global phase."""
    if actual.dim != target.dim:
        raise ConfigError("propagator dimensions do not match")
    d = actual.dim
    return float(abs(np.trace(target.matrix.conj().T @ actual.matrix)) / d)


def diagonal_z_fidelity(U: np.ndarray):
    """Fidelity of U to the nearest product of single-spin z rotations.

    Fits a global phase plus one phase per spin from the computational-basis
    diagonal of U (phase of basis state k = sum of per-spin phases over the
    down bits of k) and returns (fidelity, phases) with fidelity
    |Tr(V^dag U)|/d for the fitted diagonal V.  Any zz phase or population
    leakage lowers the fidelity.
    """
    d = U.shape[0]
    n = int(round(math.log2(d)))
    if 2 ** n != d:
        raise ConfigError("propagator dimension must be a power of 2")
    diag = np.diag(U)
    ref = diag[0] if abs(diag[0]) > 1e-30 else 1.0
    phases = np.zeros(n)
    for s in range(n):
        k = 1 << (n - 1 - s)  # basis index with only spin s flipped down
        if abs(diag[k]) > 1e-30:
            phases[s] = float(np.angle(diag[k] / ref))
    model = np.zeros(d)
    for k in range(d):
        for s in range(n):
            if k & (1 << (n - 1 - s)):
                model[k] += phases[s]
    V = np.exp(1j * (np.angle(ref) + model))
    fid = float(abs(np.sum(np.conj(V) * diag)) / d)
    return fid, phases


def average_hamiltonian_0(sys: SpinSystem, seq) -> np.ndarray:
    """Zeroth-order average Hamiltonian of an ideal-pulse cycle.

    Computed in the toggling frame of the accumulated pulse unitaries:
    Hbar = (1/T) sum_windows tau_j U_j^dag H U_j with U_j the product of the
    pulses applied before window j.
    """
    T = seq.cycle_time
    if T <= 0:
        raise ConfigError("cycle time must be positive")
    for ev in seq.events:
        if ev.duration != 0.0:
            raise ConfigError(
                "average_hamiltonian_0 requires instantaneous pulses")
    H = sys.hamiltonian()
    Urf = np.eye(sys.dim, dtype=complex)
    Hbar = np.zeros_like(H)
    t = 0.0
    for ev in seq.events:
        tau = ev.t_start - t
        if tau > 0:
            Hbar += tau * (Urf.conj().T @ H @ Urf)
        Urf = _ideal_pulse_unitary(sys, ev) @ Urf
        t = ev.t_start
    if T > t:
        Hbar += (T - t) * (Urf.conj().T @ H @ Urf)
    Hbar /= T
    return 0.5 * (Hbar + Hbar.conj().T)
