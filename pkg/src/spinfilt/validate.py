"""Desk-scale invariant suites behind ``spinfilt validate``.

Each suite returns a list of :class:`Check` records; the suites share no
state and run in a fixed order so reports are reproducible.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import filters
from .propagator import (
    ControlKind,
    SpinSystem,
    compose_slices,
    conditional_angle_axis,
    evolve_exact,
    from_rotating_frame,
    max_norm_distance,
    predict_strong,
    predict_weak,
    to_rotating_frame,
)
from .sensing import coherence_exact, coherence_filter, coherence_gaussian
from .sequences import (
    PulseSequence,
    ResonancePoint,
    SliceSpec,
    cpmg,
    integrated_step,
    resonance_tau_weak,
    sliced_alternating,
    step_function,
)
from .spin import rotation, rotation_angle_axis, unitary_fidelity


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    ok: bool
    detail: str = ""


def _check(suite, name, ok, detail=""):
    return Check(suite, name, bool(ok), detail)


def suite_spin() -> list[Check]:
    rng = np.random.default_rng(11)
    out = []
    worst_u = worst_axis = 0.0
    for _ in range(200):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        theta = rng.uniform(0.01, math.pi - 0.01)
        u = rotation(n, theta)
        worst_u = max(worst_u, np.max(np.abs(u.conj().T @ u - np.eye(2))))
        th, ax = rotation_angle_axis(np.exp(1j * rng.uniform(0, 6)) * u)
        worst_axis = max(worst_axis, abs(th - theta), np.max(np.abs(ax - n)))
    out.append(_check("spin", "rotation unitary", worst_u <= 1e-12, f"max dev {worst_u:.2e}"))
    out.append(_check("spin", "angle/axis round trip", worst_axis <= 1e-8, f"max dev {worst_axis:.2e}"))
    u, v = rotation((1, 0, 0), 0.3), rotation((0, 1, 0), 1.1)
    out.append(_check("spin", "fidelity symmetric", unitary_fidelity(u, v) == unitary_fidelity(v, u)))
    return out


def suite_sequences() -> list[Check]:
    out = []
    seq = cpmg(7, 0.3)
    out.append(_check("sequences", "cpmg total time", abs(seq.total_time - 4.2) <= 1e-15))
    sf = integrated_step(seq, seq.total_time)
    out.append(_check("sequences", "s_F(t_f) = 0", abs(sf) <= 1e-12, f"{sf!r}"))
    first = integrated_step(seq, 0.3)
    out.append(_check("sequences", "s_F(tau) = tau", abs(first - 0.3) <= 1e-12, f"{first!r}"))
    out.append(_check("sequences", "step after last pulse", step_function(seq, seq.total_time) == -1))
    spec = SliceSpec.from_tau0(10, 2, 1.0, 1.0)
    alt = sliced_alternating(spec)
    out.append(_check("sequences", "sliced pulse count", alt.n_pulses == 20))
    out.append(_check("sequences", "sliced total time", abs(alt.total_time - 40.0) <= 1e-12))
    back = PulseSequence.from_csv(alt.to_csv())
    out.append(_check("sequences", "csv round trip", back == alt))
    return out


def suite_filters() -> list[Check]:
    out = []
    x = np.linspace(1e-3, 4 * np.pi, 10_000)
    worst = 0.0
    for n in range(1, 13):
        t = 2 * n * x
        b = filters._cpmg_boundaries(x, n)
        # deviations are measured against the size of the summands, (1/t) sum |segment integral|
        scale = np.sum(np.abs(filters._segment_exp_integral(1.0, b[:, :-1], b[:, 1:])), axis=-1) / t
        ok = ~filters.weak_guard_mask(x)
        _, F, _, _ = filters.weak_filter_arrays(x, n)
        # at omega tau = 2 pi j every summand vanishes; there only the absolute floor applies
        err = np.abs(F - np.abs(filters._chi_weak_oracle_cpmg(x, n)) / t) / (scale + 1e-5)
        worst = max(worst, float(np.max(err[ok])))
    out.append(_check("filters", "weak closed form vs oracle", worst <= 1e-10, f"max scaled dev {worst:.2e}"))
    worst = 0.0
    for n in range(1, 13):
        t = 2 * n * x
        for sign in (1, -1):
            _, _, F_c, F_u, _, _ = filters.strong_filter_arrays(x, n, sign)
            oc, ou = filters._chi_strong_oracle_cpmg(x, n, sign)
            ok = ~filters.strong_guard_mask(x)
            # the strong summands are bounded by the segment lengths, so the scale is 1
            worst = max(worst, float(np.max(np.abs(F_c - np.abs(oc) / t)[ok])))
            worst = max(worst, float(np.max(np.abs(F_u - np.abs(ou) / t)[ok])))
    out.append(_check("filters", "strong closed form vs oracle", worst <= 1e-10, f"max dev {worst:.2e}"))
    f0 = filters.filter_weak(1.0, 6, math.pi / 2).F
    out.append(_check("filters", "weak resonance 2/pi", abs(f0 - 2 / math.pi) <= 1e-12, f"{f0!r}"))
    fc = filters.filters_strong(1.0, 6, math.pi).F_c
    out.append(_check("filters", "strong resonance 1/2", abs(fc - 0.5) <= 1e-12, f"{fc!r}"))
    spec = SliceSpec.from_tau0(24, 2, 1.1, 1.0)
    d = filters.grating_block_decompose(1.0, spec)
    out.append(_check("filters", "grating identity", d.residual <= 1e-10 * max(d.total, 1e-300) + 1e-14, f"{d.residual:.2e}"))
    return out


def suite_propagator() -> list[Check]:
    out = []
    sys = SpinSystem(1.0, 0.01)
    seq = cpmg(2000, 1.3)
    u = evolve_exact(sys, seq)
    out.append(_check("propagator", "unitarity at 2000 pulses", u.is_unitary(1e-12)))
    rot = to_rotating_frame(sys, u, 1.7)
    back = from_rotating_frame(sys, rot, 1.7)
    out.append(_check("propagator", "frame round trip", max_norm_distance(back, u) <= 1e-12))
    a = cpmg(4, 0.7)
    full = a.concatenate(a)
    split = evolve_exact(sys, a)
    dist = max_norm_distance(split @ split, evolve_exact(sys, full))
    out.append(_check("propagator", "composition", dist <= 1e-11, f"{dist:.2e}"))
    # second-order error of the weak prediction
    errs, thetas = [], []
    tau = resonance_tau_weak(1.0, ResonancePoint(0, 1.0, 11))
    for theta_goal in (0.02, 0.04, 0.08, 0.16):
        base = predict_weak(SpinSystem(1.0, 1.0), 11, tau)[0].theta
        s = SpinSystem(1.0, theta_goal / base)
        pred, pair = predict_weak(s, 11, tau)
        exact = to_rotating_frame(s, evolve_exact(s, cpmg(11, tau)), 22 * tau)
        errs.append(max_norm_distance(exact, pair))
        thetas.append(pred.theta)
    slope = np.polyfit(np.log(thetas), np.log(errs), 1)[0]
    out.append(_check("propagator", "weak error slope 2", abs(slope - 2.0) <= 0.15, f"slope {slope:.3f}"))
    # c = 0 additivity
    s = SpinSystem(1.0, 0.02)
    tau0 = math.pi / 2
    a1, _ = conditional_angle_axis(to_rotating_frame(s, evolve_exact(s, cpmg(20, tau0)), 40 * tau0))
    a2, _ = conditional_angle_axis(to_rotating_frame(s, evolve_exact(s, cpmg(40, tau0)), 80 * tau0))
    rel = abs(a2 - 2 * a1) / (2 * a1)
    out.append(_check("propagator", "c=0 additivity", rel <= 1e-4, f"rel {rel:.2e}"))
    one = SpinSystem(0.01, 1.0, ControlKind.ONE_PLUS)
    pred, _ = predict_strong(one, 6, math.pi)
    out.append(_check("propagator", "strong theta = omega t F_c", abs(pred.theta - 0.01 * 12 * math.pi * 0.5) <= 1e-12))
    c0 = compose_slices(sys, [(2, tau0)] * 4)
    out.append(_check("propagator", "composed unitary", c0.unitary.is_unitary(1e-12)))
    return out


def suite_sensing() -> list[Check]:
    out = []
    s = SpinSystem(1.0, 0.05)
    tau0 = math.pi / 2
    worst = 0.0
    for n in range(1, 32):
        worst = max(worst, abs(coherence_exact(s, cpmg(n, tau0)) - coherence_filter(0.05, 1.0, n, tau0)))
    out.append(_check("sensing", "exact vs cos(A t F)", worst <= 0.02, f"max dev {worst:.2e}"))
    worst = 0.0
    for n in range(1, 5):
        x = 0.05 * 2 * n * tau0 * 2 / math.pi
        dev = abs(coherence_gaussian(0.05, 1.0, n, tau0) - coherence_filter(0.05, 1.0, n, tau0))
        # exp(-x^2/2) - cos x = x^4/12 - O(x^6)
        worst = max(worst, dev - x**4 / 12)
    out.append(_check("sensing", "gaussian vs cos within x^4/12", worst <= 0.0))
    free = coherence_exact(SpinSystem(1.0, 0.0), cpmg(6, 0.4))
    out.append(_check("sensing", "A=0 flat", abs(free - 1) <= 1e-12))
    return out


SUITES: dict[str, Callable[[], list[Check]]] = {
    "spin": suite_spin,
    "sequences": suite_sequences,
    "filters": suite_filters,
    "propagator": suite_propagator,
    "sensing": suite_sensing,
}


@contextmanager
def mutated_weak_prefactor(factor: float = 1.001):
    """Temporarily perturb the closed weak-filter constant (fault injection)."""
    original = filters._WEAK_PREFACTOR
    filters._WEAK_PREFACTOR = original * factor
    try:
        yield
    finally:
        filters._WEAK_PREFACTOR = original


def run_suites(names=None, mutate: bool = False) -> list[Check]:
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    results: list[Check] = []
    if mutate:
        with mutated_weak_prefactor():
            for name in names:
                results.extend(SUITES[name]())
    else:
        for name in names:
            results.extend(SUITES[name]())
    return results

