"""Pulse-schedule generation, validation, compilation, serialization."""

import json
import math

import numpy as np
import pytest

from chainqc.errors import ConfigError, SequenceValidationError
from chainqc import lattice, pulses, spinsys
from chainqc.pulses import (
    PHASE_MX,
    PHASE_MY,
    PHASE_X,
    PHASE_Y,
    PulseEvent,
    Sequence,
)
from chainqc.spinsys import QuantumState, SpinSystem


FAP = lattice.get_preset("fluorapatite")


class TestSequenceValidation:
    def test_events_sorted(self):
        e1 = PulseEvent(2e-6, 0.0, math.pi, PHASE_X, 0)
        e2 = PulseEvent(1e-6, 0.0, math.pi, PHASE_X, 0)
        seq = Sequence((e1, e2), cycle_time=3e-6)
        assert seq.events[0].t_start == 1e-6

    def test_same_target_overlap_rejected(self):
        e1 = PulseEvent(0.0, 2e-6, math.pi, PHASE_X, 0)
        e2 = PulseEvent(1e-6, 2e-6, math.pi, PHASE_X, 0)
        with pytest.raises(SequenceValidationError) as exc:
            Sequence((e1, e2), cycle_time=5e-6)
        assert len(exc.value.offenders) == 1

    def test_distinct_targets_may_overlap(self):
        e1 = PulseEvent(0.0, 2e-6, math.pi, PHASE_X, 0)
        e2 = PulseEvent(1e-6, 2e-6, math.pi, PHASE_X, 1)
        Sequence((e1, e2), cycle_time=5e-6)

    def test_past_cycle_time_rejected(self):
        e = PulseEvent(4e-6, 2e-6, math.pi, PHASE_X, 0)
        with pytest.raises(SequenceValidationError):
            Sequence((e,), cycle_time=5e-6)

    def test_event_field_validation(self):
        with pytest.raises(ConfigError):
            PulseEvent(-1.0, 0.0, math.pi, PHASE_X, 0)
        with pytest.raises(ConfigError):
            PulseEvent(0.0, 0.0, 0.0, PHASE_X, 0)
        with pytest.raises(ConfigError):
            PulseEvent(0.0, 0.0, math.pi, PHASE_X, "plane3")


class TestWahuha:
    def test_structure(self):
        seq = pulses.wahuha(1e-6)
        assert seq.cycle_time == pytest.approx(6e-6)
        assert len(seq.events) == 4
        assert [e.t_start for e in seq.events] == pytest.approx(
            [1e-6, 2e-6, 4e-6, 5e-6])
        assert [e.phase for e in seq.events] == [PHASE_MX, PHASE_Y,
                                                 PHASE_MY, PHASE_X]
        assert all(e.target == "broadband" for e in seq.events)
        assert all(e.flip_angle == pytest.approx(math.pi / 2)
                   for e in seq.events)

    def test_finite_width_centered(self):
        w = 2e-7
        seq = pulses.wahuha(1e-6, pulse_width=w)
        assert seq.events[0].t_start == pytest.approx(1e-6 - w / 2)
        assert seq.events[0].duration == w

    def test_width_bound(self):
        with pytest.raises(ConfigError):
            pulses.wahuha(1e-6, pulse_width=1e-6)


class TestHadamard:
    def test_orders(self):
        assert pulses.hadamard_sign_matrix(2).k == 2
        assert pulses.hadamard_sign_matrix(3).k == 4
        assert pulses.hadamard_sign_matrix(5).k == 8
        assert pulses.hadamard_sign_matrix(8).k == 8

    def test_rows_orthogonal(self):
        for n in (2, 3, 4, 5, 8):
            assert pulses.hadamard_sign_matrix(n).rows_orthogonal()

    def test_effective_scale(self):
        m = pulses.hadamard_sign_matrix(4)
        for i in range(4):
            for j in range(i + 1, 4):
                assert pulses.effective_coupling_scale(m, i, j) == 0.0

    def test_recouple(self):
        m = pulses.hadamard_sign_matrix(3)
        res = pulses.recouple(m, (1, 2))
        assert pulses.effective_coupling_scale(res.matrix, 1, 2) == 1.0
        assert pulses.effective_coupling_scale(res.matrix, 0, 1) == 0.0
        assert pulses.effective_coupling_scale(res.matrix, 0, 2) == 0.0
        assert res.degraded_pairs == ()

    def test_sign_matrix_validation(self):
        with pytest.raises(ConfigError):
            pulses.SignMatrix(((1, 0), (1, 1)))


class TestDecouplingSchedule:
    def test_sign_pattern_reconstruction(self):
        m = pulses.hadamard_sign_matrix(4)
        slot = 1e-6
        seq = pulses.decoupling_schedule(m, slot)
        # replay the pi pulses per plane and recover each sign row
        for plane, row in enumerate(m.rows):
            flips = sorted(e.t_start for e in seq.events
                           if e.target == plane)
            frame = 1
            recovered = []
            for col in range(m.k):
                t = col * slot
                frame *= (-1) ** sum(1 for f in flips
                                     if t - 1e-15 < f <= t + 1e-15)
                recovered.append(frame)
            assert tuple(recovered) == row
            # trailing reset: even number of pulses per plane per cycle
            assert len(flips) % 2 == 0

    def test_pi_width_bound(self):
        m = pulses.hadamard_sign_matrix(2)
        with pytest.raises(ConfigError):
            pulses.decoupling_schedule(m, 1e-6, pi_width=0.3e-6)

    def test_cycle_propagator_z_only(self):
        sys = spinsys.build_system(FAP, 3, [(0.0, 0.0)], 1.4e6)
        m = pulses.hadamard_sign_matrix(3)
        seq = pulses.decoupling_schedule(m, 2e-6)
        U = spinsys.propagator(sys, seq).matrix
        fid, _ = spinsys.diagonal_z_fidelity(U)
        assert 1.0 - fid < 1e-12

    def test_recoupled_pair_evolves_at_full_strength(self):
        # the recoupled pair accrues exactly the free-evolution zz phase
        # while all couplings to spectators average out
        sys = spinsys.build_system(FAP, 3, [(0.0, 0.0)], 1.4e6)
        res = pulses.recouple(pulses.hadamard_sign_matrix(3), (0, 1))
        slot = 2e-6
        seq = pulses.decoupling_schedule(res.matrix, slot)
        U = spinsys.propagator(sys, seq).matrix
        J = [c.coeff for c in sys.couplings if {c.i, c.j} == {0, 1}][0]
        # compare zz phase pattern on the (0,1) pair: strip single-spin z
        # phases, then the residual diagonal must match exp(-i J T IzIz)
        T = seq.cycle_time
        n = sys.total_spins
        Iz0 = spinsys.single_spin_op(n, 0, spinsys.SZ)
        Iz1 = spinsys.single_spin_op(n, 1, spinsys.SZ)
        ref = np.diag(np.exp(-1j * J * T * np.diag(Iz0 @ Iz1).real))
        fid, phases = spinsys.diagonal_z_fidelity(U @ ref.conj().T)
        assert 1.0 - fid < 1e-12


class TestInterleave:
    def test_merged_event_count_and_validity(self):
        bb = pulses.wahuha(1e-6)
        m = pulses.hadamard_sign_matrix(3)
        sel = pulses.decoupling_schedule(m, 6e-6)
        merged = pulses.interleave(bb, sel)
        assert merged.cycle_time == pytest.approx(sel.cycle_time)
        n_bb = round(sel.cycle_time / bb.cycle_time) * len(bb.events)
        assert len(merged.events) == n_bb + len(sel.events)

    def test_selective_order_preserved(self):
        bb = pulses.wahuha(1e-6)
        m = pulses.hadamard_sign_matrix(3)
        sel = pulses.decoupling_schedule(m, 6e-6, pi_width=2e-7)
        merged = pulses.interleave(bb, sel)
        for plane in range(3):
            orig = [e.t_start for e in sel.events if e.target == plane]
            new = [e.t_start for e in merged.events if e.target == plane]
            assert len(orig) == len(new)
            assert new == sorted(new)

    def test_wide_pulse_rejected_with_offenders(self):
        bb = pulses.wahuha(1e-6)  # smallest free window = 1 us
        m = pulses.hadamard_sign_matrix(2)
        sel = pulses.decoupling_schedule(m, 8e-6, pi_width=1.5e-6)
        with pytest.raises(SequenceValidationError) as exc:
            pulses.interleave(bb, sel)
        assert len(exc.value.offenders) >= 1


class TestCycleTimeModel:
    def test_formula(self):
        assert pulses.cycle_time_model(10, 16.0, 1.21e5) == pytest.approx(
            16.0 * 100 / 1.21e5)

    def test_validation(self):
        with pytest.raises(ConfigError):
            pulses.cycle_time_model(0, 16.0, 1.0)


class TestCompileCnot:
    @staticmethod
    def _basis_state(bits):
        vecs = [spinsys.UP if b == 0 else spinsys.DOWN for b in bits]
        return QuantumState.product(vecs)

    def test_truth_table(self):
        sys = spinsys.build_system(FAP, 2, [(0.0, 0.0)], 1.4e6)
        seq, target = pulses.compile_cnot(sys, 0, 1)
        U = spinsys.propagator(sys, seq).matrix
        # control = plane 0 (first bit); flips target when control is down
        for cbit in (0, 1):
            for tbit in (0, 1):
                st = self._basis_state((cbit, tbit))
                out_state = st.apply(U)
                want = (cbit, tbit ^ cbit)
                expect = self._basis_state(want)
                assert out_state.fidelity_to(expect) == pytest.approx(
                    1.0, abs=1e-9)

    def test_fidelity_isolated(self):
        sys = spinsys.build_system(FAP, 2, [(0.0, 0.0)], 1.4e6)
        seq, target = pulses.compile_cnot(sys, 0, 1)
        U = spinsys.propagator(sys, seq)
        assert spinsys.gate_fidelity(U, target) > 1 - 1e-9

    def test_reverse_direction(self):
        sys = spinsys.build_system(FAP, 2, [(0.0, 0.0)], 1.4e6)
        seq, target = pulses.compile_cnot(sys, 1, 0)
        U = spinsys.propagator(sys, seq)
        assert spinsys.gate_fidelity(U, target) > 1 - 1e-9

    def test_spectator_plane_offset_compensated(self):
        # three planes but only the (1,2) coupling present: the compiled
        # gate must undo the spectator plane's offset precession exactly
        full = spinsys.build_system(FAP, 3, [(0.0, 0.0)], 1.4e6)
        pair = {full.spin_index(1, 0), full.spin_index(2, 0)}
        sys = SpinSystem(
            n_planes=3,
            chain_positions=full.chain_positions,
            offsets=full.offsets,
            couplings=tuple(c for c in full.couplings
                            if {c.i, c.j} == pair),
        )
        seq, target = pulses.compile_cnot(sys, 1, 2)
        U = spinsys.propagator(sys, seq)
        assert spinsys.gate_fidelity(U, target) > 1 - 1e-9

    def test_non_adjacent_rejected(self):
        sys = spinsys.build_system(FAP, 3, [(0.0, 0.0)], 1.4e6)
        with pytest.raises(ConfigError):
            pulses.compile_cnot(sys, 0, 2)

    def test_spectator_chain_infidelity_bounded(self):
        lam = 9.367e-10 / FAP.a
        sys = spinsys.build_system(FAP, 2, [(0.0, 0.0), (lam, 0.0)], 1.4e6)
        seq, target = pulses.compile_cnot(sys, 0, 1)
        U = spinsys.propagator(sys, seq)
        infid = 1.0 - spinsys.gate_fidelity(U, target)
        sigma = lattice.sigma_over_delta(FAP).sigma_over_delta
        assert infid > 0.0
        assert infid <= 4.0 * sigma**2


class TestSerialization:
    def test_round_trip(self):
        sys = spinsys.build_system(FAP, 2, [(0.0, 0.0)], 1.4e6)
        seq, _ = pulses.compile_cnot(sys, 0, 1)
        text = pulses.sequence_to_json(seq)
        back = pulses.sequence_from_json(text)
        assert back.cycle_time == seq.cycle_time
        assert back.events == seq.events
        assert pulses.sequence_to_json(back) == text

    def test_canonical_bytes(self):
        seq = pulses.wahuha(1e-6)
        a = pulses.sequence_to_json(seq)
        b = pulses.sequence_to_json(pulses.wahuha(1e-6))
        assert a == b
        obj = json.loads(a)
        assert obj["schema_version"] == pulses.SCHEDULE_SCHEMA_VERSION

    def test_bad_json_rejected(self):
        with pytest.raises(ConfigError):
            pulses.sequence_from_json("{not json")
        with pytest.raises(ConfigError):
            pulses.sequence_from_json('{"schema_version": 99}')

    def test_csv_rows(self):
        seq = pulses.wahuha(1e-6)
        rows = pulses.sequence_to_csv_rows(seq)
        assert rows[0][0] == "t_start_s"
        assert len(rows) == 5
