"""Command-line front end.

Subcommands: lattice, magnet, schedule, simulate, scalability, readout.
Every command reads one JSON config (defaults apply without one), writes its
outputs under --out, and is deterministic: identical configs give
byte-identical files once the timestamped meta line is disabled with
--no-meta.  Exit codes: 0 success, 2 config/validation error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys as _sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, config, lattice, magnet, mrfm, pulses, spinsys
from .constants import TWO_PI
from .errors import ConfigError, ConvergenceError, SequenceValidationError

__all__ = ["main"]


class _Emitter:
    """Collects output tables/documents and writes them all at the end."""

    def __init__(self, out_dir: str, fmt: str, meta: bool, command: str):
        self.out = Path(out_dir)
        self.fmt = fmt
        self.meta = meta
        self.command = command
        self.tables = []       # (name, header, rows)
        self.documents = []    # (name, obj)
        self.written = []

    def table(self, name: str, header: list[str], rows: list[list]):
        self.tables.append((name, header, rows))

    def document(self, name: str, obj: dict):
        self.documents.append((name, obj))

    def _meta_line(self) -> str:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return f"chainqc {__version__} {self.command} {stamp}"

    def flush(self) -> list[str]:
        self.out.mkdir(parents=True, exist_ok=True)
        for name, header, rows in self.tables:
            if self.fmt == "csv":
                path = self.out / f"{name}.csv"
                lines = []
                if self.meta:
                    lines.append("# " + self._meta_line())
                lines.append(",".join(header))
                for row in rows:
                    lines.append(",".join(_cell(v) for v in row))
                path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            else:
                path = self.out / f"{name}.json"
                obj = {"header": header,
                       "rows": [[_jcell(v) for v in row] for row in rows]}
                if self.meta:
                    obj["_meta"] = self._meta_line()
                path.write_text(_dumps(obj), encoding="utf-8")
            self.written.append(str(path))
        for name, obj in self.documents:
            path = self.out / f"{name}.json"
            if self.meta:
                obj = dict(obj, _meta=self._meta_line())
            path.write_text(_dumps(obj), encoding="utf-8")
            self.written.append(str(path))
        return self.written


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jcell(v):
    if isinstance(v, (int, float, str)):
        return v
    return str(v)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


# --- commands ---------------------------------------------------------------


def cmd_lattice(cfg: config.RunConfig, em: _Emitter, threads: int,
                verbose: bool):
    s = cfg.section("lattice")
    lat = cfg.lattice()
    max_sep = s["max_plane_separation"]
    rows = []
    for sep in range(1, max_sep + 1):
        dw = lattice.intra_chain_coupling(lat, 0, sep)
        rows.append([sep, dw, dw / TWO_PI])
    em.table("lattice_coupling",
             ["plane_separation", "delta_omega_rad_per_s",
              "delta_omega_Hz"], rows)

    lam_grid = [round(0.1 * k, 1) for k in range(0, 51)]
    em.table("lattice_b_coefficient", ["lambda", "b"],
             [[lam, lattice.b_coefficient(lam)] for lam in lam_grid])

    metrics = lattice.sigma_over_delta(
        lat, rel_tol=s["rel_tol"],
        include_lower_plane=s["include_lower_plane"])
    em.table("lattice_sigma_trace", ["cutoff_radius_m", "sigma_over_delta"],
             [[r, v] for r, v in metrics.trace])
    em.document("lattice_summary", {
        "lattice": lat.name,
        "a_m": lat.a,
        "delta_omega_nn_rad_per_s": metrics.delta_omega_nn,
        "delta_omega_nn_Hz": metrics.delta_omega_nn / TWO_PI,
        "sigma_rad_per_s": metrics.sigma,
        "sigma_over_delta": metrics.sigma_over_delta,
        "convergence_radius_m": metrics.convergence_radius,
        "n_transverse_sites": metrics.n_sites,
    })
    if verbose:
        print(f"sigma/delta = {metrics.sigma_over_delta:.6g}")


def cmd_magnet(cfg: config.RunConfig, em: _Emitter, threads: int,
               verbose: bool):
    s = cfg.section("magnet")
    lat = cfg.lattice()
    r0 = np.array(s["sample_origin_m"])
    n = s["n_planes"]
    if "grad_override_T_per_m" in s:
        g = s["grad_override_T_per_m"]
        field = lambda r: g * r[2]
        grad_at_origin = (0.0, 0.0, g)
        bz0 = 0.0
    else:
        mag = cfg.magnet()
        field = mag
        g0 = magnet.grad_bz_at(mag, r0)
        grad_at_origin = tuple(float(c) for c in g0)
        bz0 = magnet.bz_at(mag, r0)

    offsets, deltas = magnet.splitting_profile(field, r0, lat.a, n, lat.gamma)
    rows = []
    for i in range(n):
        d = deltas[i] if i < n - 1 else math.nan
        rows.append([i, float(offsets[i]), float(offsets[i] / TWO_PI),
                     float(d), float(d / TWO_PI)])
    em.table("magnet_splitting_profile",
             ["plane", "offset_rad_per_s", "offset_Hz",
              "delta_to_next_rad_per_s", "delta_to_next_Hz"], rows)

    frows = []
    for i in range(n):
        r = r0 + np.array([0.0, 0.0, i * lat.a])
        if isinstance(field, magnet.PrismMagnet):
            fs = magnet.sample(field, r)
            frows.append([i, float(r[2]), fs.bz, *fs.grad_bz])
        else:
            frows.append([i, float(r[2]), field(r), 0.0, 0.0,
                          s["grad_override_T_per_m"]])
    em.table("magnet_field_map",
             ["plane", "z_m", "bz_T", "dBz_dx_T_per_m", "dBz_dy_T_per_m",
              "dBz_dz_T_per_m"], frows)

    rep = magnet.plane_homogeneity(
        field, r0, s["extent_x_m"], s["extent_y_m"], lat.a,
        samples=s["homogeneity_samples"],
        threshold=s["homogeneity_threshold"])
    em.document("magnet_summary", {
        "bz_at_origin_T": float(bz0),
        "grad_bz_at_origin_T_per_m": list(grad_at_origin),
        "splitting_rad_per_s": float(deltas[0]) if n > 1 else 0.0,
        "splitting_Hz": float(deltas[0] / TWO_PI) if n > 1 else 0.0,
        "homogeneity": {
            "max_variation_T": rep.max_variation_t,
            "plane_step_T": rep.plane_step_t,
            "variation_fraction": rep.variation_fraction,
            "threshold": rep.threshold,
            "passed": rep.passed,
        },
    })
    if verbose and n > 1:
        print(f"splitting = 2*pi * {deltas[0] / TWO_PI:.6g} Hz")


def _build_schedule(seq_cfg: dict, recouple_pair=None):
    n = seq_cfg["n_planes"]
    bb = pulses.wahuha(seq_cfg["tau_s"], seq_cfg["pulse_width_s"])
    m = pulses.hadamard_sign_matrix(n)
    degraded = []
    if recouple_pair is not None:
        i, j = recouple_pair
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ConfigError(
                f"recouple pair {recouple_pair} invalid for n={n}")
        rec = pulses.recouple(m, (i, j))
        m = rec.matrix
        degraded = list(rec.degraded_pairs)
    sel = pulses.decoupling_schedule(m, seq_cfg["slot_s"],
                                     seq_cfg["pi_width_s"])
    merged = pulses.interleave(bb, sel)
    return merged, m, degraded


def cmd_schedule(cfg: config.RunConfig, em: _Emitter, threads: int,
                 verbose: bool, recouple_pair=None):
    s = cfg.section("sequence")
    if recouple_pair is None and "recouple" in s:
        recouple_pair = tuple(s["recouple"])
    merged, m, degraded = _build_schedule(s, recouple_pair)
    n = s["n_planes"]
    scales = [[pulses.effective_coupling_scale(m, i, j) if i != j else 1.0
               for j in range(n)] for i in range(n)]
    em.table("schedule_timeline",
             ["t_start_s", "duration_s", "flip_angle_rad", "phase_rad",
              "target"],
             [[e.t_start, e.duration, e.flip_angle, e.phase, str(e.target)]
              for e in merged.events])
    (em.out).mkdir(parents=True, exist_ok=True)
    em.document("schedule_validation", {
        "valid": True,
        "n_planes": n,
        "hadamard_order": m.k,
        "cycle_time_s": merged.cycle_time,
        "n_events": len(merged.events),
        "effective_coupling_scales": scales,
        "recoupled_pair": list(recouple_pair) if recouple_pair else None,
        "degraded_pairs": [[i, j, sc] for i, j, sc in degraded],
        "cycle_time_model_s": pulses.cycle_time_model(
            n, s["L"], cfg.section("scalability")["delta_omega_rad_per_s"]),
    })
    sched_path = em.out / "schedule.json"
    sched_path.write_text(pulses.sequence_to_json(merged), encoding="utf-8")
    em.written.append(str(sched_path))
    if verbose:
        print(f"schedule: {len(merged.events)} events over "
              f"{merged.cycle_time:.3e} s")


def cmd_simulate(cfg: config.RunConfig, em: _Emitter, threads: int,
                 verbose: bool):
    ss = cfg.section("spin_system")
    seq_cfg = cfg.section("sequence")
    lat = cfg.lattice()
    sys = spinsys.build_system(
        lat, ss["n_planes"], ss["chain_positions_a"], ss["grad_T_per_m"],
        include_same_plane=ss["include_same_plane"])
    summary = {"n_planes": ss["n_planes"],
               "n_chains": sys.n_chains,
               "schedule": ss["schedule"]}
    if ss["schedule"] == "decoupling":
        m = pulses.hadamard_sign_matrix(ss["n_planes"])
        seq = pulses.decoupling_schedule(m, seq_cfg["slot_s"],
                                         seq_cfg["pi_width_s"])
        U = spinsys.propagator(sys, seq, mode="ideal")
        fid, phases = spinsys.diagonal_z_fidelity(U.matrix)
        summary["identity_fidelity"] = fid
        summary["identity_infidelity"] = 1.0 - fid
        summary["z_phases_rad"] = [float(p) for p in phases]
        state = spinsys.QuantumState.all_plus_x(sys.total_spins)
    else:
        seq, target = pulses.compile_cnot(sys, ss["cnot_control"],
                                          ss["cnot_target"])
        U = spinsys.propagator(sys, seq, mode="ideal")
        fid = spinsys.gate_fidelity(U, target)
        summary["cnot_fidelity"] = fid
        summary["cnot_infidelity"] = 1.0 - fid
        summary["spectator_chains"] = sys.n_chains - 1
        state = spinsys.QuantumState.all_up(sys.total_spins)

    traj = spinsys.evolve(sys, seq, state, mode="ideal")
    rows = []
    for t, st in traj:
        rows.append([t] + [spinsys.expectation_iz_plane(sys, st, p)
                           for p in range(sys.n_planes)])
    em.table("simulate_trajectory",
             ["t_s"] + [f"iz_plane_{p}" for p in range(sys.n_planes)], rows)
    em.document("simulate_summary", summary)
    if verbose:
        print(f"fidelity = {fid:.12f}")


def _scalability_row(p, n, t2_grid):
    bt = mrfm.required_field_over_temp(n, p)
    row = [n, bt]
    for t2 in t2_grid:
        row.append(t2 * p.delta_omega / (n * n))
    return row


def cmd_scalability(cfg: config.RunConfig, em: _Emitter, threads: int,
                    verbose: bool):
    s = cfg.section("scalability")
    p = cfg.scalability()
    t2_grid = s["T2_grid_s"]
    n_grid = s["n_grid"]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        rows = list(ex.map(lambda n: _scalability_row(p, n, t2_grid), n_grid))
    cols = ["n", "B_over_T_required_T_per_K"]
    for t2 in t2_grid:
        cols.append(f"budgetL_T2_{_t2_tag(t2)}")
    em.table("scalability_curve", cols, rows)
    budget = mrfm.gate_budget(p)
    em.document("scalability_summary", {
        "design_point": {
            "n": p.n,
            "B0_T": p.B0,
            "temperature_K": p.temperature,
            "force_N": mrfm.force_at_n(p, p.n),
            "threshold_N": p.detection_threshold,
        },
        "max_measurable_qubits": mrfm.max_measurable_qubits(p),
        "gate_budget": budget.budget,
        "gate_budget_times_L": budget.budget_times_l,
        "cycle_time_s": budget.cycle_time,
    })
    if verbose:
        print(f"max measurable qubits = {mrfm.max_measurable_qubits(p)}")


def _t2_tag(t2: float) -> str:
    txt = f"{t2:g}".replace(".", "p").replace("-", "m")
    return txt + "s"


def cmd_readout(cfg: config.RunConfig, em: _Emitter, threads: int,
                verbose: bool):
    s = cfg.section("readout")
    params = cfg.cai()
    res = mrfm.simulate_cai_readout(
        params, initial=s["initial"],
        steps_per_period=s["steps_per_period"],
        delta_omega=s.get("delta_omega_rad_per_s"))
    stride = max(1, len(res.times) // 4000)
    rows = [[float(res.times[k]), float(res.iz[k]), float(res.detuning[k])]
            for k in range(0, len(res.times), stride)]
    em.table("readout_cai_trace",
             ["t_s", "iz", "detuning_rad_per_s"], rows)
    cant = cfg.cantilever()
    em.document("readout_summary", {
        "omega_1_rad_per_s": params.omega_1,
        "omega_m_rad_per_s": params.omega_m,
        "excursion_rad_per_s": params.excursion,
        "adiabaticity": params.adiabaticity,
        "following_figure": res.following_figure,
        "modulation_amplitude": res.modulation_amplitude,
        "norm_drift": res.norm_drift,
        "warning": res.warning,
        "thermal_force_noise_N_per_sqrt_Hz": mrfm.thermal_force_noise(cant),
    })
    if verbose:
        print(f"following figure = {res.following_figure:.6f}")


_COMMANDS = {
    "lattice": cmd_lattice,
    "magnet": cmd_magnet,
    "schedule": cmd_schedule,
    "simulate": cmd_simulate,
    "scalability": cmd_scalability,
    "readout": cmd_readout,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chainqc",
        description="Spin-chain register simulator and schedule compiler")
    ap.add_argument("--version", action="version",
                    version=f"chainqc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None,
                        help="JSON config file (defaults apply without one)")
        sp.add_argument("--out", default="out",
                        help="output directory (default: ./out)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--no-meta", action="store_true",
                        help="omit the timestamped meta line")
        sp.add_argument("--verbose", action="store_true")
        if name == "schedule":
            sp.add_argument("--recouple", default=None, metavar="I,J",
                            help="recouple plane pair I,J")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = config.load_config(args.config)
        em = _Emitter(args.out, args.format, not args.no_meta, args.command)
        if args.command == "schedule":
            pair = None
            if args.recouple is not None:
                try:
                    i, j = (int(x) for x in args.recouple.split(","))
                except ValueError:
                    raise ConfigError(
                        "--recouple expects two comma-separated integers"
                    ) from None
                pair = (i, j)
            cmd_schedule(cfg, em, args.threads, args.verbose,
                         recouple_pair=pair)
        else:
            _COMMANDS[args.command](cfg, em, args.threads, args.verbose)
        written = em.flush()
        if args.verbose:
            for path in written:
                print(f"wrote {path}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    except SequenceValidationError as exc:
        print(f"validation error: {exc}", file=_sys.stderr)
        for off in exc.offenders:
            print(f"  offender: {off}", file=_sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
