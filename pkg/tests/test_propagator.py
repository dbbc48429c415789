import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from spinfilt.propagator import (
    ConditionalUnitary,
    ControlKind,
    SpinSystem,
    compose_slices,
    conditional_angle_axis,
    conditional_rotation,
    coordinate_rotation_angle,
    down_plus_state,
    effective_filter,
    evolve_exact,
    evolve_trajectory,
    from_rotating_frame,
    gate_fidelity_report,
    magnus_validity,
    max_norm_distance,
    predict_strong,
    predict_weak,
    sample_times,
    simulate_gate,
    sliced_evolution_predict,
    to_rotating_frame,
)
from spinfilt.filters import filter_weak
from spinfilt.sequences import PulseSequence, ResonancePoint, SliceSpec, cpmg, resonance_tau_weak, sliced_alternating
from spinfilt.spin import IDENTITY, SIGMA_X, SIGMA_Z, rotation

Z_CONTROL = np.diag([1.0, -1.0])


def expm_oracle(system, seq):
    """4x4 evolution with target (x) control ordering, one matrix exponential per segment."""
    b = [0.0, *seq.pulse_times, seq.total_time]
    u = np.eye(4, dtype=complex)
    for i in range(len(b) - 1):
        s = (-1) ** i
        if system.control is ControlKind.HALF:
            s_op = s * Z_CONTROL
        else:
            s_op = 0.5 * (s * Z_CONTROL + system.control.sign * np.eye(2))
        h = 0.5 * system.omega * np.kron(SIGMA_Z, np.eye(2)) + 0.5 * system.A * np.kron(SIGMA_X, s_op)
        u = expm(-1j * h * (b[i + 1] - b[i])) @ u
    return u


def gate_system():
    return SpinSystem(1.0, 0.06)


@pytest.mark.parametrize("control", list(ControlKind))
def test_evolve_exact_matches_4x4_oracle(control, rng):
    for _ in range(5):
        times = np.sort(rng.uniform(0.1, 9.9, int(rng.integers(0, 8))))
        seq = PulseSequence(tuple(times), 10.0)
        system = SpinSystem(float(rng.uniform(0.1, 3)), float(rng.uniform(-2, 2)), control)
        assert np.allclose(evolve_exact(system, seq).full(), expm_oracle(system, seq), atol=1e-11)


def test_free_precession():
    system = SpinSystem(1.3, 0.0)
    u = evolve_exact(system, cpmg(5, 0.4))
    expected = np.diag([np.exp(-0.65j * 4), np.exp(0.65j * 4)])
    assert np.allclose(u.u_plus, expected) and np.allclose(u.u_minus, expected)


def test_zero_splitting_even_cpmg_is_identity():
    u = evolve_exact(SpinSystem(0.0, 0.8), cpmg(6, 0.37))
    assert np.allclose(u.u_plus, IDENTITY, atol=1e-13) and np.allclose(u.u_minus, IDENTITY, atol=1e-13)


def test_unitary_for_long_sequences():
    u = evolve_exact(SpinSystem(1.0, 0.05), cpmg(10_000, 1.57))
    assert u.is_unitary(1e-12)


@given(st.integers(1, 30), st.integers(0, 30), st.floats(0.1, 2.0))
def test_composition_split_between_pulses(n1, n2, tau):
    system = SpinSystem(1.0, 0.3)
    first, second = cpmg(n1, tau), cpmg(max(n2, 1), tau * 0.7)
    whole = evolve_exact(system, first.concatenate(second))
    tail = evolve_exact(system, second)
    # after an odd number of pulses the control sign is flipped, exchanging the branches
    if n1 % 2:
        tail = tail.swapped()
    assert max_norm_distance(tail @ evolve_exact(system, first), whole) <= 1e-11


def test_conditional_unitary_checks():
    with pytest.raises(ValueError):
        ConditionalUnitary(np.eye(3), np.eye(2))
    u = ConditionalUnitary(rotation((1, 0, 0), 0.3), rotation((0, 0, 1), 0.2))
    psi = down_plus_state()
    assert np.allclose(u.apply(psi), u.full() @ psi)
    assert u.swapped().u_plus is u.u_minus


def test_trajectory_matches_pointwise_evolution():
    system = SpinSystem(1.0, 0.2)
    seq = cpmg(3, 0.8)
    times = sample_times(seq, 3)
    for t, u in zip(times, evolve_trajectory(system, seq, times)):
        cut = [p for p in seq.pulse_times if p < t]
        if t == 0:
            assert np.allclose(u.u_plus, IDENTITY)
            continue
        part = PulseSequence(tuple(cut), t)
        assert max_norm_distance(u, evolve_exact(system, part)) <= 1e-12


# --- frames ---------------------------------------------------------------


def test_rotating_frame_examples():
    system = SpinSystem(1.0, 0.3)
    u = evolve_exact(system, cpmg(3, 0.5))
    assert max_norm_distance(to_rotating_frame(system, u, 0.0), u) == 0.0
    back = from_rotating_frame(system, to_rotating_frame(system, u, 2.2), 2.2)
    assert max_norm_distance(back, u) <= 1e-12
    free = SpinSystem(1.0, 0.0)
    rot = to_rotating_frame(free, evolve_exact(free, cpmg(4, 0.3)), 2.4)
    assert np.allclose(rot.u_plus, IDENTITY) and np.allclose(rot.u_minus, IDENTITY)


def test_strong_frame_requires_spin_one():
    u = evolve_exact(SpinSystem(0.1, 1.0), cpmg(2, 1.0))
    with pytest.raises(ValueError):
        to_rotating_frame(SpinSystem(0.1, 1.0), u, 1.0, "strong")
    with pytest.raises(ValueError):
        to_rotating_frame(SpinSystem(0.1, 1.0), u, 1.0, "lab")


def test_strong_frame_cancels_unconditional_hyperfine():
    for control in (ControlKind.ONE_PLUS, ControlKind.ONE_MINUS):
        system = SpinSystem(0.0, 1.0, control)
        seq = cpmg(4, 0.9)
        rot = to_rotating_frame(system, evolve_exact(system, seq), seq.total_time, "strong")
        assert np.allclose(rot.u_plus, IDENTITY, atol=1e-12) and np.allclose(rot.u_minus, IDENTITY, atol=1e-12)


# --- weak prediction ------------------------------------------------------


def test_predict_weak_on_resonance():
    system = SpinSystem(1.0, 0.01)
    pred, pair = predict_weak(system, 8, math.pi / 2)
    assert pred.theta == pytest.approx(0.01 * 8 * math.pi * 2 / math.pi, rel=1e-12)
    assert pred.axis.axis == pytest.approx((1.0, 0.0, 0.0), abs=1e-12)
    assert np.allclose(pair.u_plus, rotation((1, 0, 0), pred.theta))
    assert np.allclose(pair.u_minus, rotation((1, 0, 0), -pred.theta))
    one, _ = predict_weak(SpinSystem(1.0, 0.01, ControlKind.ONE_MINUS), 8, math.pi / 2)
    assert one.theta == pytest.approx(pred.theta / 2, rel=1e-12)


def test_gate_prediction_theta_identity():
    system = SpinSystem(2.0, 0.05)
    for n, tau in [(3, 0.9), (8, 0.8), (11, 2.3)]:
        pred, _ = predict_weak(system, n, tau)
        res = filter_weak(2.0, n, tau)
        assert pred.theta == pytest.approx(0.05 * res.total_time * res.F, rel=1e-12)


def test_predict_weak_second_order_distance():
    tau = resonance_tau_weak(1.0, ResonancePoint(0, 0.5, 8))
    base = predict_weak(SpinSystem(1.0, 1.0), 8, tau)[0].theta
    for theta in (0.1, 0.05):
        system = SpinSystem(1.0, theta / base)
        _, pair = predict_weak(system, 8, tau)
        exact = to_rotating_frame(system, evolve_exact(system, cpmg(8, tau)), 16 * tau)
        assert max_norm_distance(exact, pair) <= 0.25 * theta**2


def test_weak_error_scaling_at_fixed_sequence():
    tau = resonance_tau_weak(1.0, ResonancePoint(0, 1.0, 11))
    base = predict_weak(SpinSystem(1.0, 1.0), 11, tau)[0].theta
    thetas, errs = [], []
    for theta in (0.02, 0.04, 0.08, 0.16):
        system = SpinSystem(1.0, theta / base)
        assert system.A <= 0.01
        pred, pair = predict_weak(system, 11, tau)
        exact = to_rotating_frame(system, evolve_exact(system, cpmg(11, tau)), 22 * tau)
        thetas.append(pred.theta)
        errs.append(max_norm_distance(exact, pair))
    slope = np.polyfit(np.log(thetas), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.15)


def test_weak_error_bounded_at_fixed_coupling():
    # A/omega = 0.01 with N as the knob: the error stays a bounded multiple of theta^2
    system = SpinSystem(1.0, 0.01)
    for n in range(2, 13):
        tau = resonance_tau_weak(1.0, ResonancePoint(0, 1.0, n))
        pred, pair = predict_weak(system, n, tau)
        exact = to_rotating_frame(system, evolve_exact(system, cpmg(n, tau)), 2 * n * tau)
        assert max_norm_distance(exact, pair) <= 0.2 * pred.theta**2


# --- strong prediction ----------------------------------------------------


def test_predict_strong_c_zero():
    system = SpinSystem(0.01, 1.0, ControlKind.ONE_PLUS)
    pred, pair = predict_strong(system, 4, math.pi)
    t = 8 * math.pi
    assert pred.theta == pytest.approx(0.01 * t * 0.5, rel=1e-12)
    assert pred.source == "strong"
    assert abs(pred.axis.axis[2]) == pytest.approx(1.0)
    assert pair.is_unitary()


def test_predict_strong_unconditional_resonance():
    system = SpinSystem(0.01, 1.0, ControlKind.ONE_MINUS)
    pred, pair = predict_strong(system, 4, 2 * math.pi)
    assert pred.theta == pytest.approx(0.0, abs=1e-12)
    assert pred.unconditional_axis.angle == pytest.approx(0.01 * 16 * math.pi * 0.5, rel=1e-12)
    # branches coincide when only the unconditional part remains
    assert np.allclose(pair.u_plus, pair.u_minus, atol=1e-12)


@pytest.mark.parametrize("control", [ControlKind.ONE_PLUS, ControlKind.ONE_MINUS])
@pytest.mark.parametrize("a_tau", [math.pi + math.pi / 6, 2.3])
def test_predict_strong_second_order(control, a_tau):
    errs, wts = [], []
    for omega in (0.004, 0.008, 0.016):
        system = SpinSystem(omega, 1.0, control)
        _, pair = predict_strong(system, 6, a_tau)
        t = 12 * a_tau
        exact = to_rotating_frame(system, evolve_exact(system, cpmg(6, a_tau)), t, "strong")
        errs.append(max_norm_distance(exact, pair))
        wts.append(omega * t)
    slope = np.polyfit(np.log(wts), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.15)


def test_predict_strong_rejects_spin_half():
    with pytest.raises(ValueError, match="filters_strong_half"):
        predict_strong(SpinSystem(0.01, 1.0), 4, math.pi)


# --- sliced composition ---------------------------------------------------


def test_sliced_c_zero_equals_merged_cpmg():
    system = gate_system()
    spec = SliceSpec.from_tau0(6, 3, math.pi / 2, 0.0)
    sliced = sliced_evolution_predict(system, spec)
    _, merged = predict_weak(system, 18, math.pi / 2)
    assert max_norm_distance(sliced.unitary, merged) <= 1e-12
    assert sliced.theta_eff == pytest.approx(predict_weak(system, 18, math.pi / 2)[0].theta, rel=1e-12)


def test_sliced_rejects_odd_slice_count():
    with pytest.raises(ValueError):
        sliced_evolution_predict(gate_system(), SliceSpec.from_tau0(3, 2, 1.0, 0.5))


def test_alternating_gate_prediction():
    system = gate_system()
    spec = SliceSpec.from_tau0(10, 2, math.pi / 2, 1.0)
    pred = sliced_evolution_predict(system, spec)
    seq = sliced_alternating(spec)
    exact = to_rotating_frame(system, evolve_exact(system, seq), seq.total_time)
    psi = down_plus_state()
    assert gate_fidelity_report(exact, pred.unitary, psi) >= 0.998
    theta, axis = conditional_angle_axis(pred.unitary)
    assert axis == pytest.approx((0.0, -1.0, 0.0), abs=1e-9)
    assert theta == pytest.approx(pred.theta_eff, rel=1e-9)
    # ideal conditional pi/2 about the predicted axis
    target = conditional_rotation((0.0, -1.0, 0.0), math.pi / 2)
    assert 0.99 <= gate_fidelity_report(exact, target, psi) <= 1.0


def test_effective_filter_matches_composition():
    system = gate_system()
    spec = SliceSpec.from_tau0(10, 2, math.pi / 2, 1.0)
    pred = sliced_evolution_predict(system, spec)
    f_plus = filter_weak(1.0, 2, spec.tau_plus).F
    f_minus = filter_weak(1.0, 2, spec.tau_minus).F
    assert pred.f_eff == pytest.approx(effective_filter(f_plus, f_minus, 1.0, 2), rel=1e-12)


def test_two_plus_c_slices_cancel():
    system = gate_system()
    tau_plus = SliceSpec.from_tau0(2, 2, math.pi / 2, 1.0).tau_plus
    single = compose_slices(system, [(2, tau_plus)])
    double = compose_slices(system, [(2, tau_plus), (2, tau_plus)])
    assert conditional_angle_axis(double.unitary)[0] == pytest.approx(0.0, abs=1e-7)
    seq = cpmg(2, tau_plus).concatenate(cpmg(2, tau_plus))
    exact = to_rotating_frame(system, evolve_exact(system, seq), seq.total_time)
    assert conditional_angle_axis(exact)[0] < 0.25 * conditional_angle_axis(single.unitary)[0]


def test_coordinate_rotation_angle():
    for n in (2, 4, 6):
        for c in (-1.0, 0.5, 1.0):
            tau = (math.pi / 2 + c * math.pi / (2 * n))
            angle = coordinate_rotation_angle(n, 1.0, tau, reduce=True)
            assert math.cos(angle) == pytest.approx(math.cos(c * math.pi))
            assert math.sin(angle) == pytest.approx(math.sin(c * math.pi), abs=1e-12)
    assert coordinate_rotation_angle(4, 1.0, math.pi / 2, reduce=True) == pytest.approx(0.0, abs=1e-12)
    odd = coordinate_rotation_angle(3, 1.0, math.pi / 2, reduce=True)
    assert abs(odd) == pytest.approx(math.pi)
    assert coordinate_rotation_angle(3, 2.0, 0.5) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        coordinate_rotation_angle(0, 1.0, 1.0)


def test_magnus_validity():
    assert magnus_validity(0.0).error == 0.0 and magnus_validity(0.0).tier == "ok"
    assert magnus_validity(0.2).error == pytest.approx(0.01)
    assert magnus_validity(0.19).tier == "ok" and magnus_validity(0.21).tier == "marginal"
    assert magnus_validity(math.pi / 2).tier == "invalid"
    with pytest.raises(ValueError):
        magnus_validity(-0.1)


def test_gate_fidelity_report():
    u = conditional_rotation((0, 1, 0), 0.7)
    assert gate_fidelity_report(u, u) == pytest.approx(1.0)
    assert gate_fidelity_report(u, u, down_plus_state()) == pytest.approx(1.0)
    shifted = ConditionalUnitary(u.u_plus, -u.u_minus)
    assert gate_fidelity_report(shifted, u) == pytest.approx(1.0)
    # a relative branch sign turns |down,+> into |down,->
    assert gate_fidelity_report(shifted, u, down_plus_state()) == pytest.approx(0.0, abs=1e-12)


def test_plain_cpmg_gate_fidelity():
    system = gate_system()
    tau = resonance_tau_weak(1.0, ResonancePoint(0, 1.0, 20))
    seq = cpmg(20, tau)
    exact = to_rotating_frame(system, evolve_exact(system, seq), seq.total_time)
    target = conditional_rotation((0.0, -1.0, 0.0), math.pi / 2)
    assert gate_fidelity_report(exact, target, down_plus_state()) == pytest.approx(0.90, abs=0.02)


def _axis_track(system, seq, boundaries):
    angles = []
    for t, u in zip(boundaries, evolve_trajectory(system, seq, boundaries)):
        theta, axis = conditional_angle_axis(to_rotating_frame(system, u, t))
        angles.append(math.degrees(math.atan2(-axis[1], axis[0])))
    return np.array(angles)


def test_axis_stability_sliced_vs_cpmg():
    system = gate_system()
    spec = SliceSpec.from_tau0(10, 2, math.pi / 2, 1.0)
    seq = sliced_alternating(spec)
    ends = np.cumsum([2 * spec.pulses_per_slice * tau for tau in spec.slice_taus()])
    sliced = _axis_track(system, seq, ends)
    assert np.max(np.abs(sliced - 90.0)) <= 5.0
    tau = resonance_tau_weak(1.0, ResonancePoint(0, 1.0, 20))
    plain = cpmg(20, tau)
    cp = _axis_track(system, plain, [2 * 2 * tau * j for j in range(1, 11)])
    assert np.ptp(cp) >= 45.0


def test_c_zero_additivity():
    system = SpinSystem(1.0, 0.02)
    for n in (5, 10, 20, 30, 39):
        t = 2 * n * math.pi / 2
        a1 = conditional_angle_axis(to_rotating_frame(system, evolve_exact(system, cpmg(n, math.pi / 2)), t))[0]
        a2 = conditional_angle_axis(to_rotating_frame(system, evolve_exact(system, cpmg(2 * n, math.pi / 2)), 2 * t))[0]
        assert a2 <= math.pi
        assert a2 == pytest.approx(2 * a1, rel=1e-4)


def test_simulate_gate_trace():
    system = gate_system()
    spec = SliceSpec.from_tau0(10, 2, math.pi / 2, 1.0)
    seq = sliced_alternating(spec)
    trace = simulate_gate(system, seq, math.pi / 2, (0.0, -1.0, 0.0))
    assert len(trace.time) == 21 * 21 + 1
    assert trace.coherence[0] == 1.0 and trace.fidelity[0] == pytest.approx(1.0)
    assert np.all(np.abs(trace.coherence) <= 1 + 1e-12)
    assert np.allclose(trace.sx**2 + trace.sy**2 + trace.sz**2 <= 1 + 1e-12, True)
    assert trace.final_fidelity == pytest.approx(0.99517, abs=1e-4)
    free = simulate_gate(SpinSystem(1.0, 0.0), seq, 0.0, (1.0, 0.0, 0.0))
    assert np.allclose(free.fidelity, 1.0)


def test_spin_system_validation():
    with pytest.raises(ValueError):
        SpinSystem(-1.0, 0.1)
    assert SpinSystem(1.0, 0.05).regime == "weak"
    assert SpinSystem(0.05, 1.0, "one+").regime == "strong"
    assert SpinSystem(1.0, 1.0).regime == "intermediate"
    assert SpinSystem(1.0, 0.2, "one-").control.sign == -1
