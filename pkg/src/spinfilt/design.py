"""Search for alternating +c/-c pulse sequences realizing a target conditional gate."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .filters import filter_weak
from .propagator import (
    SpinSystem,
    compose_slices,
    conditional_rotation,
    down_plus_state,
    evolve_exact,
    gate_fidelity_report,
    magnus_validity,
    to_rotating_frame,
)
from .sequences import PulseSequence, SliceSpec, cpmg, sliced_alternating

PER_SLICE_LIMIT = 0.1


@dataclass(frozen=True)
class GateDesign:
    ok: bool
    phi: float
    theta: float
    c: float
    pulses_per_slice: int
    slices: int
    tau_plus: float
    tau_minus: float
    theta_eff: float
    f_eff: float
    per_slice_angle: float
    fidelity_unitary: float
    fidelity_state: float
    magnus_tier: str
    message: str = ""

    @property
    def n_pulses(self) -> int:
        return self.pulses_per_slice * self.slices

    @property
    def plain_cpmg(self) -> bool:
        return self.c == 0.0

    def sequence(self) -> PulseSequence:
        if self.plain_cpmg:
            return cpmg(self.n_pulses, self.tau_plus)
        return sliced_alternating(self.spec())

    def spec(self) -> SliceSpec:
        return SliceSpec(self.slices, self.pulses_per_slice, self.tau_plus, self.tau_minus, 0, self.c)


def target_axis(phi: float) -> tuple[float, float, float]:
    """Unit vector of sigma_phi = cos(phi) sigma_x - sin(phi) sigma_y."""
    return (math.cos(phi), -math.sin(phi), 0.0)


def _validate(system: SpinSystem, seq: PulseSequence, axis, theta: float) -> tuple[float, float]:
    u = to_rotating_frame(system, evolve_exact(system, seq), seq.total_time)
    target = conditional_rotation(axis, theta)
    return gate_fidelity_report(u, target), gate_fidelity_report(u, target, down_plus_state())


def _pair_angle(system: SpinSystem, n: int, tau_plus: float, tau_minus: float) -> tuple[float, float, float]:
    """First-order angle of one +c/-c slice pair, and the larger single-slice angle."""
    a = system.weak_coupling
    f_p = filter_weak(system.omega, n, tau_plus).F
    f_m = filter_weak(system.omega, n, tau_minus).F
    ang_p = a * 2 * n * tau_plus * f_p
    ang_m = a * 2 * n * tau_minus * f_m
    return ang_p + ang_m, max(ang_p, ang_m), (tau_plus * f_p + tau_minus * f_m) / (tau_plus + tau_minus)


def design_gate(system: SpinSystem, phi: float, theta: float, n_max: int = 100) -> GateDesign:
    """Choose (c, n, s) for exp(-i theta/2 sigma_phi (x) s_z) in the weak-coupling frame.

    c = 2 phi / pi at k = 0. Every slice size n admits slice counts s (even)
    whose first-order angle brackets theta; each candidate is checked with the
    exact propagator and the best unitary fidelity wins. c = 0 designs are
    plain CPMG sequences.
    """
    if not abs(phi) <= math.pi:
        raise ValueError("phi must lie in [-pi, pi]")
    if not 0 < theta < 2 * math.pi:
        raise ValueError("theta must lie in (0, 2 pi)")
    if not (system.omega > 0 and system.A > 0):
        raise ValueError("gate design needs omega > 0 and A > 0")
    if n_max < 2:
        raise ValueError("pulse budget must allow at least two pulses")
    axis = target_axis(phi)
    c = 2 * phi / math.pi
    if abs(c) >= 2 - 1e-9:
        # sigma_phi at phi = +-pi is -sigma_x; c = +-2 sits on a filter zero
        raise ValueError("phi = +-pi lies on a filter zero; use phi = 0 with theta -> 2 pi - theta")
    tau0 = math.pi / (2 * system.omega)

    if c == 0.0:
        return _design_cpmg(system, phi, theta, n_max, tau0, axis)

    candidates = []
    best_reach = 0.0
    smallest = math.inf
    for n in range(max(2, int(math.floor(abs(c))) + 1), n_max // 2 + 1):
        delta = c * tau0 / n
        tau_p, tau_m = tau0 + delta, tau0 - delta
        pair, per_slice, f_eff = _pair_angle(system, n, tau_p, tau_m)
        max_pairs = n_max // (2 * n)
        best_reach = max(best_reach, pair * max_pairs)
        smallest = min(smallest, pair)
        pairs = int(round(theta / pair)) if pair > 0 else 0
        pairs = min(max(pairs, 1), max_pairs)
        if abs(pairs * pair - theta) > 0.5 * pair + 1e-12:
            continue
        candidates.append((n, 2 * pairs, tau_p, tau_m, pairs * pair, f_eff, per_slice))
    if not candidates:
        if theta < smallest:
            return _failure(phi, theta, c, smallest, n_max, "smallest pair angle")
        return _failure(phi, theta, c, best_reach, n_max)

    results = []
    for n, s, tau_p, tau_m, theta_eff, f_eff, per_slice in candidates:
        spec = SliceSpec(s, n, tau_p, tau_m, 0, c)
        f_u, f_s = _validate(system, sliced_alternating(spec), axis, theta)
        results.append((f_u, f_s, n, s, tau_p, tau_m, theta_eff, f_eff, per_slice))
    f_u, f_s, n, s, tau_p, tau_m, theta_eff, f_eff, per_slice = max(results, key=lambda r: (r[0], -r[2] * r[3]))
    return _report(phi, theta, c, n, s, tau_p, tau_m, theta_eff, f_eff, per_slice, f_u, f_s)


def _design_cpmg(system, phi, theta, n_max, tau0, axis) -> GateDesign:
    # at c = 0 every pulse period adds the same commuting rotation, so one period is one slice
    per_pulse = filter_weak(system.omega, 1, tau0).F * system.weak_coupling * 2 * tau0
    n = int(round(theta / per_pulse))
    if n == 0:
        return _failure(phi, theta, 0.0, per_pulse, n_max, "smallest pair angle")
    if n > n_max:
        return _failure(phi, theta, 0.0, per_pulse * n_max, n_max)
    f_u, f_s = _validate(system, cpmg(n, tau0), axis, theta)
    return _report(phi, theta, 0.0, n, 1, tau0, tau0, n * per_pulse, 2 / math.pi, per_pulse, f_u, f_s)


def _report(phi, theta, c, n, s, tau_p, tau_m, theta_eff, f_eff, per_slice, f_u, f_s) -> GateDesign:
    tier = magnus_validity(per_slice).tier
    message = ""
    if per_slice > PER_SLICE_LIMIT:
        message = f"per-slice angle {per_slice:.3g} rad exceeds {PER_SLICE_LIMIT}; Magnus estimate tier is {tier}"
    return GateDesign(True, phi, theta, c, n, s, tau_p, tau_m, theta_eff, f_eff, per_slice, f_u, f_s, tier, message)


def _failure(phi, theta, c, reach, n_max, label="max theta_eff") -> GateDesign:
    msg = f"theta={theta:.6g} unreachable within N_max={n_max}; {label}={reach:.6g}"
    nan = float("nan")
    return GateDesign(False, phi, theta, c, 0, 0, nan, nan, reach, nan, nan, nan, nan, "invalid", msg)


def predicted_design_unitary(system: SpinSystem, design: GateDesign):
    """First-order composed prediction for a design (rotating frame)."""
    if design.plain_cpmg:
        return compose_slices(system, [(design.n_pulses, design.tau_plus)])
    return compose_slices(system, [(design.pulses_per_slice, tau) for tau in design.spec().slice_taus()])

