"""Pulse-schedule construction, validation, and compilation.

Schedules are timed lists of RF pulses, either broadband (all spins) or
plane-selective.  Generators here produce the WAHUHA homonuclear decoupling
cycle, Hadamard-scheduled selective pi-pulse decoupling, pairwise
recoupling, merged (interleaved) timelines, and a compiled CNOT; the
cycle-time model converts schedule structure into the clock period used by
the scalability analysis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from scipy.linalg import hadamard

from .constants import TWO_PI
from .errors import ConfigError, SequenceValidationError
from .spinsys import Propagator, SpinSystem, single_spin_op, SX, SZ

__all__ = [
    "PulseEvent",
    "Sequence",
    "SignMatrix",
    "RecoupleResult",
    "wahuha",
    "hadamard_sign_matrix",
    "decoupling_schedule",
    "effective_coupling_scale",
    "recouple",
    "interleave",
    "cycle_time_model",
    "compile_cnot",
    "sequence_to_json",
    "sequence_from_json",
    "sequence_to_csv_rows",
]

# Phase conventions (rad): 0 = x, pi/2 = y, pi = -x, 3*pi/2 = -y.
PHASE_X = 0.0
PHASE_Y = 0.5 * math.pi
PHASE_MX = math.pi
PHASE_MY = 1.5 * math.pi

Target = Union[str, int]


@dataclass(frozen=True)
class PulseEvent:
    """One RF pulse.  duration 0 means instantaneous (ideal)."""

    t_start: float
    duration: float
    flip_angle: float
    phase: float
    target: Target  # "broadband" or plane index

    def __post_init__(self):
        if self.t_start < 0:
            raise ConfigError("t_start must be non-negative")
        if self.duration < 0:
            raise ConfigError("duration must be non-negative")
        if not 0.0 < self.flip_angle <= TWO_PI:
            raise ConfigError("flip_angle must be in (0, 2*pi]")
        if self.target != "broadband" and not isinstance(self.target, int):
            raise ConfigError("target must be 'broadband' or a plane index")

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration


@dataclass(frozen=True)
class Sequence:
    """Time-ordered pulse schedule over one cycle."""

    events: tuple[PulseEvent, ...]
    cycle_time: float
    label: str = ""

    def __post_init__(self):
        ordered = tuple(sorted(self.events, key=lambda e: e.t_start))
        object.__setattr__(self, "events", ordered)
        offenders = []
        last_end: dict[Target, float] = {}
        for ev in ordered:
            if ev.t_end > self.cycle_time * (1 + 1e-12) + 1e-300:
                offenders.append(ev)
            prev = last_end.get(ev.target)
            if prev is not None and ev.t_start < prev - 1e-15:
                offenders.append(ev)
            last_end[ev.target] = max(last_end.get(ev.target, 0.0), ev.t_end)
        if offenders:
            raise SequenceValidationError(
                "sequence events overlap or run past cycle_time", offenders)

    def shifted(self, dt: float) -> "Sequence":
        evs = tuple(replace(e, t_start=e.t_start + dt) for e in self.events)
        return Sequence(evs, self.cycle_time + dt, self.label)


@dataclass(frozen=True)
class SignMatrix:
    """Rows of +-1 signs; one row per plane, one column per time slot."""

    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        k = len(self.rows[0]) if self.rows else 0
        for row in self.rows:
            if len(row) != k:
                raise ConfigError("ragged sign matrix")
            if any(s not in (-1, 1) for s in row):
                raise ConfigError("sign matrix entries must be +-1")

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def k(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=int)

    def rows_orthogonal(self) -> bool:
        a = self.as_array()
        g = a @ a.T
        off = g - np.diag(np.diag(g))
        return bool(np.all(off == 0))


@dataclass(frozen=True)
class RecoupleResult:
    matrix: SignMatrix
    pair: tuple[int, int]
    degraded_pairs: tuple[tuple[int, int, float], ...]  # (i, j, scale)


def wahuha(tau: float, pulse_width: float = 0.0) -> Sequence:
    """The 4-pulse WAHUHA cycle over 6*tau.

    tau, (pi/2)_{-x}, tau, (pi/2)_y, 2*tau, (pi/2)_{-y}, tau, (pi/2)_x, tau;
    pulses broadband, centered on the nominal instants.
    """
    if tau <= 0:
        raise ConfigError("tau must be positive")
    if pulse_width < 0 or pulse_width >= tau:
        raise ConfigError("pulse_width must satisfy 0 <= width < tau")
    half = 0.5 * math.pi
    centers_phases = [
        (1.0 * tau, PHASE_MX),
        (2.0 * tau, PHASE_Y),
        (4.0 * tau, PHASE_MY),
        (5.0 * tau, PHASE_X),
    ]
    events = tuple(
        PulseEvent(t_start=c - pulse_width / 2, duration=pulse_width,
                   flip_angle=half, phase=ph, target="broadband")
        for c, ph in centers_phases
    )
    return Sequence(events, cycle_time=6.0 * tau, label="wahuha")


def hadamard_sign_matrix(n: int) -> SignMatrix:
    """First n rows of the Sylvester Hadamard matrix of order 2^ceil(log2(max(n,2)))."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    k = 1 << max(1, math.ceil(math.log2(max(n, 2))))
    H = hadamard(k)
    return SignMatrix(tuple(tuple(int(x) for x in H[i]) for i in range(n)))


def decoupling_schedule(m: SignMatrix, slot: float,
                        pi_width: float = 0.0) -> Sequence:
    """Selective pi pulses timed by the sign rows.

    Each plane starts in the +1 frame; a pi pulse is centered at every slot
    boundary where its row flips sign, plus a trailing reset pulse if the
    row ends at -1 so cycles compose.  cycle_time = k * slot.
    """
    if slot <= 0:
        raise ConfigError("slot must be positive")
    if pi_width < 0 or pi_width > slot / 4:
        raise ConfigError("pi_width must satisfy 0 <= width <= slot/4")
    k = m.k
    events = []
    for plane, row in enumerate(m.rows):
        frame = 1
        for col in range(k):
            if row[col] != frame:
                t = col * slot
                t_start = max(0.0, t - pi_width / 2)
                events.append(PulseEvent(t_start, pi_width, math.pi,
                                         PHASE_X, plane))
                frame = row[col]
        if frame == -1:
            t_start = k * slot - pi_width
            events.append(PulseEvent(t_start, pi_width, math.pi,
                                     PHASE_X, plane))
    return Sequence(tuple(events), cycle_time=k * slot,
                    label=f"hadamard-decoupling-k{k}")


def effective_coupling_scale(m: SignMatrix, i: int, j: int) -> float:
    """Fraction of the zz coupling between planes i and j surviving the schedule."""
    if i == j:
        raise ConfigError("distinct planes required")
    a = m.as_array()
    return float(np.dot(a[i], a[j])) / m.k


def recouple(m: SignMatrix, pair: tuple[int, int]) -> RecoupleResult:
    """Recouple one plane pair by giving both planes identical sign rows.

    All other rows are left unchanged; any spectator pair whose scale
    becomes nonzero is reported rather than hidden (with distinct Hadamard
    rows elsewhere there are none).
    """
    i, j = pair
    if i == j:
        raise ConfigError("distinct planes required")
    rows = list(m.rows)
    rows[j] = rows[i]
    out = SignMatrix(tuple(rows))
    degraded = []
    for p in range(out.n):
        for q in range(p + 1, out.n):
            if (p, q) == (min(i, j), max(i, j)):
                continue
            s = effective_coupling_scale(out, p, q)
            if s != 0.0:
                degraded.append((p, q, s))
    return RecoupleResult(matrix=out, pair=(i, j),
                          degraded_pairs=tuple(degraded))


def _free_windows(events, total: float):
    """Complement of the pulse intervals in [0, total]."""
    windows = []
    t = 0.0
    for ev in sorted(events, key=lambda e: e.t_start):
        if ev.t_start > t:
            windows.append((t, ev.t_start))
        t = max(t, ev.t_end)
    if total > t:
        windows.append((t, total))
    return windows


def interleave(broadband: Sequence, selective: Sequence) -> Sequence:
    """Merge a selective schedule into repetitions of a broadband cycle.

    The broadband cycle is repeated to cover the selective cycle_time and
    each selective pulse is placed inside the nearest free-evolution window
    of the broadband timeline (shifted minimally if it straddles a broadband
    pulse).  Raises SequenceValidationError listing every selective event
    that cannot fit.
    """
    if broadband.cycle_time <= 0:
        raise ConfigError("broadband cycle_time must be positive")
    span = max(broadband.cycle_time, selective.cycle_time)
    reps = max(1, math.ceil(span / broadband.cycle_time - 1e-12))
    total = reps * broadband.cycle_time
    bb_events = [
        replace(e, t_start=e.t_start + r * broadband.cycle_time)
        for r in range(reps) for e in broadband.events
    ]
    windows = _free_windows(bb_events, total)
    min_window = min((b - a for a, b in windows), default=0.0)
    offenders = [ev for ev in selective.events if ev.duration >= min_window]
    if offenders:
        raise SequenceValidationError(
            f"selective pulse width >= smallest broadband window "
            f"({min_window:.3e} s)", offenders)
    placed = []
    last_end: dict[Target, float] = {}
    for ev in selective.events:
        lo = last_end.get(ev.target, 0.0)
        best = None
        for a, b in windows:
            if b - a <= ev.duration:
                continue
            start = min(max(ev.t_start, a, lo), b - ev.duration)
            if start < a or start < lo:
                continue
            shift = abs(start - ev.t_start)
            if best is None or shift < best[0]:
                best = (shift, start)
        if best is None:
            offenders.append(ev)
            continue
        new = replace(ev, t_start=best[1])
        placed.append(new)
        last_end[ev.target] = new.t_end
    if offenders:
        raise SequenceValidationError(
            "selective pulses do not fit the broadband free windows",
            offenders)
    return Sequence(tuple(bb_events) + tuple(placed), cycle_time=total,
                    label=f"{broadband.label}+{selective.label}")


def cycle_time_model(n: int, L: float, delta_omega: float) -> float:
    """Clock period of the decoupling/recoupling scheme: t_c = L*n^2/delta_omega."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    if L <= 0 or delta_omega <= 0:
        raise ConfigError("L and delta_omega must be positive")
    return L * n * n / delta_omega


def _norm_flip(angle: float) -> float:
    """Map an angle to (0, 2*pi]; returns 0.0 for a no-op rotation."""
    a = math.fmod(angle, TWO_PI)
    if a < 0:
        a += TWO_PI
    if a < 1e-15 or TWO_PI - a < 1e-15:
        return 0.0
    return a


def _z_rotation_events(plane: int, alpha: float, t: float) -> list[PulseEvent]:
    """Composite exp(+i*alpha*Iz) on a plane: X(pi/2), Y(alpha), X(-pi/2)."""
    a = _norm_flip(alpha)
    if a == 0.0:
        return []
    half = 0.5 * math.pi
    return [
        PulseEvent(t, 0.0, half, PHASE_X, plane),
        PulseEvent(t, 0.0, a, PHASE_Y, plane),
        PulseEvent(t, 0.0, half, PHASE_MX, plane),
    ]


def _cnot_target(sys: SpinSystem, control: int, target: int) -> Propagator:
    """Ideal CNOT on every chain copy (control plane -> target plane)."""
    n = sys.total_spins
    U = np.eye(sys.dim, dtype=complex)
    for ch in range(sys.n_chains):
        c = sys.spin_index(control, ch)
        t = sys.spin_index(target, ch)
        p_up = 0.5 * np.eye(sys.dim) + single_spin_op(n, c, SZ)
        p_dn = 0.5 * np.eye(sys.dim) - single_spin_op(n, c, SZ)
        x_t = 2.0 * single_spin_op(n, t, SX)
        U = (p_up + p_dn @ x_t) @ U
    return Propagator(U)


def compile_cnot(sys: SpinSystem, control: int, target: int):
    """Compile a CNOT between adjacent planes.

    A free-evolution interval accrues a zz phase of pi from the plane-pair
    coupling; explicit z-rotation composites undo the offset precession and
    convert the controlled phase into a CNOT via target-plane pi/2
    rotations.  Returns (Sequence, ideal target Propagator).
    """
    if abs(control - target) != 1:
        raise ConfigError(
            "compile_cnot supports nearest-neighbor planes only")
    for p in (control, target):
        if not 0 <= p < sys.n_planes:
            raise ConfigError(f"plane {p} out of range")
    s1 = sys.spin_index(control, 0)
    s2 = sys.spin_index(target, 0)
    J = None
    for c in sys.couplings:
        if {c.i, c.j} == {s1, s2} and c.kind == "zz":
            J = c.coeff
            break
    if J is None or J == 0.0:
        raise ConfigError("no zz coupling between the requested planes")
    t_evol = math.pi / abs(J)
    s = 1.0 if J > 0 else -1.0
    half = 0.5 * math.pi
    events: list[PulseEvent] = [
        PulseEvent(0.0, 0.0, half, PHASE_MY, target),
    ]
    for p in range(sys.n_planes):
        alpha = sys.offsets[p] * t_evol
        if p == target:
            alpha += s * half
        elif p == control:
            # s*pi/2 closes the controlled phase; the extra -pi converts the
            # leftover conditional sign on the flip block into a global phase.
            alpha += s * half - math.pi
        events.extend(_z_rotation_events(p, alpha, t_evol))
    events.append(PulseEvent(t_evol, 0.0, half, PHASE_Y, target))
    seq = Sequence(tuple(events), cycle_time=t_evol,
                   label=f"cnot-{control}-{target}")
    return seq, _cnot_target(sys, control, target)


# --- serialization ---------------------------------------------------------

SCHEDULE_SCHEMA_VERSION = 1


def _event_to_obj(ev: PulseEvent) -> dict:
    return {
        "t_start": ev.t_start,
        "duration": ev.duration,
        "flip_angle": ev.flip_angle,
        "phase": ev.phase,
        "target": ev.target,
    }


def sequence_to_json(seq: Sequence) -> str:
    """Canonical JSON text (sorted keys, minimal separators, trailing newline)."""
    obj = {
        "schema_version": SCHEDULE_SCHEMA_VERSION,
        "label": seq.label,
        "cycle_time": seq.cycle_time,
        "events": [_event_to_obj(e) for e in seq.events],
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def sequence_from_json(text: str) -> Sequence:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid schedule JSON: {exc}") from None
    if obj.get("schema_version") != SCHEDULE_SCHEMA_VERSION:
        raise ConfigError("unsupported schedule schema_version")
    events = []
    for e in obj.get("events", []):
        target = e["target"]
        if target != "broadband":
            target = int(target)
        events.append(PulseEvent(
            t_start=float(e["t_start"]),
            duration=float(e["duration"]),
            flip_angle=float(e["flip_angle"]),
            phase=float(e["phase"]),
            target=target,
        ))
    return Sequence(tuple(events), cycle_time=float(obj["cycle_time"]),
                    label=str(obj.get("label", "")))


def sequence_to_csv_rows(seq: Sequence) -> list[list]:
    """Rows for CSV export: header + one row per event."""
    rows = [["t_start_s", "duration_s", "flip_angle_rad", "phase_rad", "target"]]
    for ev in seq.events:
        rows.append([repr(ev.t_start), repr(ev.duration), repr(ev.flip_angle),
                     repr(ev.phase), str(ev.target)])
    return rows
