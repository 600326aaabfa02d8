"""Command-line interface: validation, design, sweeps, simulation runs,
transient scenarios, and the figure-reproduction harness.

All outputs are comma-separated tables with a header row, 12-significant-
digit scientific notation and LF line endings; identical config + command
always produces byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 unknown command or figure id.
"""

import argparse
import math
import os
import sys
from importlib import resources

import numpy as np

from . import analytic, averaged, scenarios
from .analytic import (OperatingPoint, duty_for_target_vo, fall_time_exact,
                       solve_operating_point, steady_state_vo)
from .config import RunConfig, parse_config, parse_config_text
from .control import closed_loop_run, feedforward_tf
from .errors import (ArccosDomain, CommutationImpossible, ConfigError,
                     DutyOutOfBounds, EmptyDutyRange, GateOverrun,
                     InvalidDuty, NoConvergence, NoCrossover,
                     NonPeriodicWindow, NonPositiveParameter, UnknownFigure,
                     ZeroGainOperatingPoint)
from .params import (min_output_cap, ripple_estimate, size_inductor,
                     size_series_cap, validate)
from .simulator import ModulationCommand, run, soft_switching_report, spectrum
from .smallsignal import bode, bode_points, design_pi, loop_margins, \
    loop_response, perturb_bode_oracle, plant_tf

_NUMERIC_ERRORS = (NoConvergence, CommutationImpossible, ArccosDomain,
                   DutyOutOfBounds, EmptyDutyRange, NoCrossover,
                   ZeroGainOperatingPoint, GateOverrun, InvalidDuty,
                   NonPeriodicWindow)

FIGURES = ("fig4a", "fig5", "fig7", "fig9", "fig13", "fig14", "fig17",
           "fig19", "fig20")

COMMANDS = ("validate", "design", "steady", "bode", "simulate", "transient",
            "reproduce")

# Figure-table grids are frozen so outputs stay byte-stable.
_BODE_GRID = tuple(10.0 * 10.0 ** (k / 30.0) for k in range(91))
_DUTY_STEP = 0.002
_FIG4A_LOADS = (10.0, 20.0, 30.0, 38.09)
_FIG17_AMPS = tuple(np.linspace(1.45, 2.6, 12))
_FIG17_LOAD = 57.6          # 10 W at 24 V
_FIG17_FF_AMP = 1.40        # margin below the weakest coupling amplitude
_FIG20_LOAD = 120.0
_FIG20_AMPS = (1.0, 1.85)   # peak amplitudes of the 2 -> 3.7 A pk-pk ramp
_WAVE_RATE_PER_CYCLE = 256


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.11e}"


def _write_table(path, header: str, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _load_config(args) -> RunConfig:
    return parse_config(args.config)


def _builtin_config(name: str) -> RunConfig:
    text = resources.files("wptrx").joinpath(f"configs/{name}.cfg").read_text()
    return parse_config_text(text)


def _duty_grid():
    n = int(round(1.0 / _DUTY_STEP)) - 1
    return [(k + 1) * _DUTY_STEP for k in range(n)]


def _nominal_op(vp, rc: RunConfig) -> OperatingPoint:
    """Operating point implied by a config: pinned delay from feedforward
    (or an explicit phase_delay_norm), duty from the config or from the
    reference voltage."""
    if rc.phase_delay_norm is not None:
        fst = rc.phase_delay_norm
    else:
        fst = vp.f_s * feedforward_tf(rc.v_ref, rc.feedforward_amp, vp)
    duty = rc.duty if rc.duty is not None else \
        duty_for_target_vo(vp.i_ls_amp, vp.r_load, rc.v_ref, fst)
    v_o = steady_state_vo(vp.i_ls_amp, vp.r_load, duty, fst)
    return OperatingPoint.pinned(duty, fst, vp.f_s, v_o=v_o)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    rc = _load_config(args)
    vp = validate(rc.params)
    print(f"l_s      = {vp.l_s:.6g} H")
    print(f"c_s      = {vp.c_s:.6g} F")
    print(f"c_s1     = {vp.c_s1:.6g} F")
    print(f"c_d1     = {vp.c_d1:.6g} F")
    print(f"c_o      = {vp.c_o:.6g} F")
    print(f"r_load   = {vp.r_load:.6g} ohm")
    print(f"f_s      = {vp.f_s:.6g} Hz")
    print(f"i_ls_amp = {vp.i_ls_amp:.6g} A")
    print(f"omega    = {vp.omega:.6g} rad/s")
    print(f"c_sum    = {vp.c_sum:.6g} F")
    print(f"t_period = {vp.t_period:.6g} s")
    for wmsg in vp.warnings:
        print(f"warning: {wmsg}")
    return 0


def cmd_design(args) -> int:
    rc = _load_config(args)
    vp = validate(rc.params)
    rows = []
    if vp.r_ls_esr > 0:
        ls_min = size_inductor(args.q, vp.r_ls_esr, vp.f_s)
        rows.append(("l_s_min", ls_min))
    rows.append(("c_s_resonant", size_series_cap(vp.l_s, vp.f_s)))
    rows.append(("c_o_min", min_output_cap(vp.i_ls_amp, args.ripple_frac,
                                           rc.v_ref, vp.f_s)))
    rows.append(("ripple_pp_bound", ripple_estimate(vp.i_ls_amp, vp.f_s,
                                                    vp.c_o)))
    op = _nominal_op(vp, rc)
    gains = design_pi(vp, op, rc.f_c)
    plant = plant_tf(vp, op)
    fc, pm, g10 = loop_margins(plant, gains)
    rows += [("duty", op.duty), ("phase_delay_norm", op.phase_delay_norm),
             ("plant_dc_gain", plant.dc_gain), ("plant_pole_hz", plant.pole_hz),
             ("k_p", gains.k_p), ("k_i", gains.k_i),
             ("d_min", gains.d_min), ("d_max", gains.d_max),
             ("crossover_hz", fc), ("phase_margin_deg", pm),
             ("loop_gain_10hz_db", g10)]
    for name, value in rows:
        print(f"{name:18s} = {value:.6g}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_table(os.path.join(args.out, "design.csv"), "name,value",
                     [(n, v) for n, v in rows])
    return 0


def cmd_steady(args) -> int:
    rc = _load_config(args)
    vp = validate(rc.params)
    if args.sweep:
        lo, hi, step = (float(x) for x in args.sweep.split(":"))
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        duties = [lo + k * step for k in range(n)]
    elif args.duty is not None:
        duties = [args.duty]
    elif rc.duty is not None:
        duties = [rc.duty]
    else:
        raise InvalidDuty("no duty given: use --duty or --sweep")
    rows = []
    for d in duties:
        op = solve_operating_point(vp, d, exact=args.exact)
        rows.append((d, op.t_f, op.phase_delay_norm, op.v_o, op.regulable))
    header = "duty,t_f,phase_delay_norm,v_o,regulable"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_table(os.path.join(args.out, "steady.csv"), header, rows)
    else:
        print(header)
        for r in rows:
            print(",".join(_fmt(x) for x in r))
    return 0


def cmd_bode(args) -> int:
    rc = _load_config(args)
    vp = validate(rc.params)
    op = _nominal_op(vp, rc)
    pts = bode(plant_tf(vp, op), _BODE_GRID)
    header = "f_hz,mag_db,phase_deg"
    rows = [(p.f_hz, p.mag_db, p.phase_deg) for p in pts]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_table(os.path.join(args.out, "bode.csv"), header, rows)
    else:
        print(header)
        for r in rows:
            print(",".join(_fmt(x) for x in r))
    return 0


def cmd_simulate(args) -> int:
    rc = _load_config(args)
    vp = validate(rc.params)
    duty = args.duty if args.duty is not None else \
        (rc.duty if rc.duty is not None else 0.532)
    op = solve_operating_point(vp, duty, exact=True)
    cmd = ModulationCommand.make(duty, fall_time_exact(vp, op.v_o), vp.f_s)
    rate = args.sample_rate if args.sample_rate else \
        _WAVE_RATE_PER_CYCLE * vp.f_s
    result = run(vp, cmd, args.cycles, v_o0=op.v_o, sample_rate=rate)
    os.makedirs(args.out, exist_ok=True)
    result.waveform.save_table(os.path.join(args.out, "waveform.csv"))
    result.waveform.save_events(os.path.join(args.out, "events.csv"))
    _write_table(
        os.path.join(args.out, "diagnostics.csv"),
        "cycle,t_f_meas,t_r_meas,zvs_ok,zcs_ok,q_f,q_r,e_in,e_load,"
        "e_hard_switch,v_o_mean,v_o_ripple_pp",
        [(k, d.t_f_meas, d.t_r_meas, d.zvs_ok, d.zcs_ok, d.q_f, d.q_r,
          d.e_in, d.e_load, d.e_hard_switch, d.v_o_mean, d.v_o_ripple_pp)
         for k, d in enumerate(result.diagnostics)])
    rep = soft_switching_report(result.diagnostics)
    print(f"cycles = {args.cycles}, steady = {result.steady_detected}, "
          f"zvs = {rep.zvs_fraction:.3f}, zcs = {rep.zcs_fraction:.3f}")
    return 0


def _scenario_by_name(name: str, vp, rc: RunConfig):
    if name == "startup":
        return scenarios.startup_scenario(vp, rc.v_ref, rc.feedforward_amp), vp
    if name == "load_step":
        return scenarios.load_step_scenario(vp, rc.v_ref, rc.feedforward_amp,
                                            r_low=vp.r_load), vp
    if name == "source_ramp":
        p = vp.with_load(_FIG20_LOAD).with_amplitude(_FIG20_AMPS[0])
        return scenarios.source_ramp_scenario(
            p, rc.v_ref, _FIG20_AMPS[0], _FIG20_AMPS[0], _FIG20_AMPS[1]), p
    raise UnknownFigure(f"unknown scenario {name!r}")


def cmd_transient(args) -> int:
    rc = _load_config(args)
    vp = validate(rc.params)
    sc, p = _scenario_by_name(args.scenario, vp, rc)
    gains = scenarios.design_gains(p, rc.v_ref, sc.i_ls_ff, rc.f_c)
    rec = closed_loop_run(sc, gains, p)
    os.makedirs(args.out, exist_ok=True)
    _write_table(os.path.join(args.out, f"{sc.name}.csv"),
                 "t,v_o_sample,v_o_mean,duty",
                 zip(rec.t, rec.v_o_sample, rec.v_o_mean, rec.duty))
    print(f"final = {rec.final_value:.4f} V, settle = {rec.settling_time:.6g} s, "
          f"overshoot = {rec.overshoot:.4f} V, error = "
          f"{rec.steady_state_error:.2e} V")
    return 0


# ---------------------------------------------------------------------------
# figure reproduction
# ---------------------------------------------------------------------------

def _fig4a(out, rc):
    vp = validate(rc.params)
    rows = []
    for row in averaged.vo_vs_duty_curve(vp, _FIG4A_LOADS, _duty_grid()):
        rows.append((row.r_load, row.duty, row.v_o, row.regulable))
    _write_table(os.path.join(out, "fig4a.csv"),
                 "r_load,duty,v_o,regulable", rows)
    return ["fig4a.csv"]


def _fig5(out, rc):
    vp = validate(rc.params)
    rows = []
    for d in _duty_grid():
        ideal = steady_state_vo(vp.i_ls_amp, vp.r_load, d, 0.0)
        op = solve_operating_point(vp, d)
        rows.append((d, ideal, op.v_o))
    _write_table(os.path.join(out, "fig5.csv"),
                 "duty,v_o_ideal,v_o_with_caps", rows)
    op_pk = solve_operating_point(vp, analytic.optimal_duty(0.0761))
    drop = analytic.resonant_cap_voltage_drop(vp.i_ls_amp, vp.r_load,
                                              op_pk.phase_delay_norm)
    _write_table(os.path.join(out, "fig5_summary.csv"),
                 "phase_delay_norm,peak_reduction_v",
                 [(op_pk.phase_delay_norm, drop)])
    return ["fig5.csv", "fig5_summary.csv"]


def _fig7(out, rc):
    vp = validate(rc.params)
    op = _nominal_op(vp, rc)
    pts = bode(plant_tf(vp, op), _BODE_GRID)
    _write_table(os.path.join(out, "fig7_analytic.csv"),
                 "f_hz,mag_db,phase_deg",
                 [(p.f_hz, p.mag_db, p.phase_deg) for p in pts])
    pts_o = perturb_bode_oracle(vp, op, _BODE_GRID)
    _write_table(os.path.join(out, "fig7_oracle.csv"),
                 "f_hz,mag_db,phase_deg",
                 [(p.f_hz, p.mag_db, p.phase_deg) for p in pts_o])
    return ["fig7_analytic.csv", "fig7_oracle.csv"]


def _fig9(out, rc):
    vp = validate(rc.params)
    op = _nominal_op(vp, rc)
    plant = plant_tf(vp, op)
    gains = design_pi(vp, op, rc.f_c)
    ol, cl = loop_response(plant, gains, _BODE_GRID)
    ol_pts = bode_points(_BODE_GRID, ol)
    cl_pts = bode_points(_BODE_GRID, cl)
    _write_table(os.path.join(out, "fig9.csv"),
                 "f_hz,ol_mag_db,ol_phase_deg,cl_mag_db,cl_phase_deg",
                 [(o.f_hz, o.mag_db, o.phase_deg, c.mag_db, c.phase_deg)
                  for o, c in zip(ol_pts, cl_pts)])
    return ["fig9.csv"]


def _steady_va_run(rc, n_capture: int, sample: bool):
    """Settled run at the prototype operating point (measured delay)."""
    vp = validate(rc.params)
    duty = rc.duty if rc.duty is not None else 0.532
    fst = rc.phase_delay_norm if rc.phase_delay_norm is not None else 0.0672
    cmd = ModulationCommand.make(duty, fst / vp.f_s, vp.f_s)
    v0 = solve_operating_point(vp, duty).v_o
    settle = run(vp, cmd, 8000, v_o0=v0)  # one RC time constant of lead-in
    rate = _WAVE_RATE_PER_CYCLE * vp.f_s if sample else 0.0
    cap = run(vp, cmd, n_capture, initial=settle.final_state,
              sample_rate=rate)
    return vp, cap


def _fig13(out, rc):
    vp, cap = _steady_va_run(rc, 4, sample=True)
    cap.waveform.save_table(os.path.join(out, "fig13.csv"))
    cap.waveform.save_events(os.path.join(out, "fig13_events.csv"))
    return ["fig13.csv", "fig13_events.csv"]


def _fig14(out, rc):
    vp, cap = _steady_va_run(rc, 32, sample=True)
    files = []
    summary = []
    for channel in ("v_cd1", "i_ls"):
        spec_res = spectrum(cap.waveform, channel, 40, vp.f_s)
        name = f"fig14_{channel}.csv"
        _write_table(os.path.join(out, name),
                     "harmonic,f_hz,amplitude,phase_rad",
                     [(k, k * vp.f_s, a, ph)
                      for k, a, ph in spec_res.harmonics])
        summary.append((channel, spec_res.fundamental, spec_res.thd))
        files.append(name)
    _write_table(os.path.join(out, "fig14_summary.csv"),
                 "channel,fundamental,thd", summary)
    return files + ["fig14_summary.csv"]


def _fig17(out, rc):
    vp = validate(rc.params).with_load(_FIG17_LOAD)
    rows = scenarios.coupling_sweep(vp, rc.v_ref, _FIG17_FF_AMP,
                                    _FIG17_AMPS, f_c=rc.f_c)
    _write_table(os.path.join(out, "fig17.csv"),
                 "i_ls_amp,v_o_steady,reg_error,duty,zvs_fraction,"
                 "zcs_fraction",
                 [(r.i_ls_amp, r.v_o_steady, r.reg_error, r.duty,
                   r.zvs_fraction, r.zcs_fraction) for r in rows])
    print(f"max regulation error = {max(r.reg_error for r in rows):.4g} V")
    return ["fig17.csv"]


def _fig19(out, rc):
    vp = validate(rc.params)
    sc = scenarios.load_step_scenario(vp, rc.v_ref, rc.feedforward_amp,
                                      r_low=36.0)
    gains = scenarios.design_gains(vp, rc.v_ref, sc.i_ls_ff, rc.f_c)
    rec = closed_loop_run(sc, gains, vp)
    _write_table(os.path.join(out, "fig19.csv"), "t,v_o_sample,v_o_mean,duty",
                 zip(rec.t, rec.v_o_sample, rec.v_o_mean, rec.duty))
    return ["fig19.csv"]


def _fig20(out, rc):
    vp = validate(rc.params).with_load(_FIG20_LOAD) \
        .with_amplitude(_FIG20_AMPS[0])
    sc = scenarios.source_ramp_scenario(vp, rc.v_ref, _FIG20_AMPS[0],
                                        _FIG20_AMPS[0], _FIG20_AMPS[1])
    gains = scenarios.design_gains(vp, rc.v_ref, sc.i_ls_ff, rc.f_c)
    rec = closed_loop_run(sc, gains, vp)
    _write_table(os.path.join(out, "fig20.csv"), "t,v_o_sample,v_o_mean,duty",
                 zip(rec.t, rec.v_o_sample, rec.v_o_mean, rec.duty))
    return ["fig20.csv"]


_FIG_BUILDERS = {"fig4a": (_fig4a, "table2"), "fig5": (_fig5, "table2"),
                 "fig7": (_fig7, "fig7"), "fig9": (_fig9, "fig7"),
                 "fig13": (_fig13, "table2"), "fig14": (_fig14, "table2"),
                 "fig17": (_fig17, "table2"), "fig19": (_fig19, "table2"),
                 "fig20": (_fig20, "table2")}

_PLOT_HELPER = '''\
"""Convenience plotting for the reproduction tables (no acceptance weight)."""
import sys
import matplotlib.pyplot as plt
import numpy as np

for path in sys.argv[1:]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    fig, ax = plt.subplots()
    for col in names[1:]:
        ax.plot(data[names[0]], data[col], label=col)
    ax.set_xlabel(names[0])
    ax.legend()
    ax.set_title(path)
plt.show()
'''


def cmd_reproduce(args) -> int:
    if args.figure not in FIGURES:
        raise UnknownFigure(f"unknown figure {args.figure!r}; supported: "
                            + ", ".join(FIGURES))
    builder, cfg_name = _FIG_BUILDERS[args.figure]
    rc = parse_config(args.config) if args.config else \
        _builtin_config(cfg_name)
    os.makedirs(args.out, exist_ok=True)
    files = builder(args.out, rc)
    with open(os.path.join(args.out, "plot_tables.py"), "w",
              newline="\n") as fh:
        fh.write(_PLOT_HELPER)
    print("wrote " + ", ".join(files))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser(command: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=f"wptrx {command}")
    if command != "reproduce":
        p.add_argument("--config", required=True)
    if command == "design":
        p.add_argument("--q", type=float, default=100.0)
        p.add_argument("--ripple-frac", type=float, default=0.01)
        p.add_argument("--out", default="")
    if command == "steady":
        p.add_argument("--duty", type=float)
        p.add_argument("--sweep", help="start:stop:step")
        p.add_argument("--exact", action="store_true")
        p.add_argument("--out", default="")
    if command == "bode":
        p.add_argument("--out", default="")
    if command == "simulate":
        p.add_argument("--cycles", type=int, required=True)
        p.add_argument("--duty", type=float)
        p.add_argument("--sample-rate", type=float, default=0.0)
        p.add_argument("--out", default="out")
    if command == "transient":
        p.add_argument("--scenario", required=True,
                       choices=("startup", "load_step", "source_ramp"))
        p.add_argument("--out", default="out")
    if command == "reproduce":
        p.add_argument("figure")
        p.add_argument("--config", default="")
        p.add_argument("--out", default="out")
    return p


_HANDLERS = {"validate": cmd_validate, "design": cmd_design,
             "steady": cmd_steady, "bode": cmd_bode,
             "simulate": cmd_simulate, "transient": cmd_transient,
             "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: wptrx {" + ",".join(COMMANDS) + "} [options]")
        return 0 if argv else 4
    command = argv[0]
    if command not in COMMANDS:
        print(f"error: unknown command {command!r}", file=sys.stderr)
        return 4
    parser = _build_parser(command)
    try:
        args = parser.parse_args(argv[1:])
    except SystemExit:
        return 2
    try:
        return _HANDLERS[command](args)
    except (ConfigError, NonPositiveParameter, FileNotFoundError,
            IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnknownFigure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except _NUMERIC_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
