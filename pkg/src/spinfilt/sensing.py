"""Control-spin coherence as an entanglement witness, and frequency scans.

Coherence values are normalized to 1 at t = 0, i.e. they report
<s_+(t)>/<s_+(0)> = tr[U_+^dagger U_- rho] with rho the target-spin state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filters import (
    _segment_exp_integral,
    filter_weak,
    grating,
    weak_filter_arrays,
)
from .propagator import ControlKind, SpinSystem, evolve_exact, evolve_segments
from .sequences import PulseSequence, SliceSpec, cpmg, sliced_alternating
from .spin import dagger

MIXED = 0.5 * np.eye(2, dtype=complex)


def check_density(rho, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError("target state must be a 2x2 density matrix")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError("density matrix must have unit trace")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def coherence_trace(system: SpinSystem, seq: PulseSequence, target_state=None) -> complex:
    """Complex tr[U_+^dagger U_- rho] from the exact lab-frame branches."""
    rho = MIXED if target_state is None else check_density(target_state)
    u = evolve_exact(system, seq)
    return complex(np.trace(dagger(u.u_plus) @ u.u_minus @ rho))


def coherence_exact(system: SpinSystem, seq: PulseSequence, target_state=None) -> float:
    return coherence_trace(system, seq, target_state).real


def _effective_coupling(A: float, control) -> float:
    return 0.5 * A if ControlKind(control).is_spin_one else A


def coherence_filter(A: float, omega: float, N: int, tau: float, control=ControlKind.HALF) -> float:
    """cos(A t F_w), valid for a maximally mixed target."""
    res = filter_weak(omega, N, tau)
    return math.cos(_effective_coupling(A, control) * res.total_time * res.F)


def coherence_gaussian(A: float, omega: float, N: int, tau: float, control=ControlKind.HALF) -> float:
    """Short-time form exp(-(A t F_w)^2 / 2)."""
    res = filter_weak(omega, N, tau)
    x = _effective_coupling(A, control) * res.total_time * res.F
    return math.exp(-0.5 * x * x)


@dataclass(frozen=True, eq=False)
class CoherenceCurve:
    times: np.ndarray
    coherence: np.ndarray
    method: str

    def __post_init__(self):
        if self.method not in ("exact", "filter", "gaussian"):
            raise ValueError(f"unknown method {self.method!r}")
        if np.any(np.abs(self.coherence) > 1 + 1e-10):
            raise ValueError("coherence exceeds 1 in magnitude")


def coherence_curve(system: SpinSystem, n_values, tau: float, method: str = "exact") -> CoherenceCurve:
    """Coherence after CPMG(N, tau) for each N, i.e. sampled at t = 2 N tau."""
    n_values = [int(n) for n in n_values]
    times, values = [], []
    for n in n_values:
        t = 2 * n * tau
        times.append(t)
        if n == 0:
            values.append(1.0)
        elif method == "exact":
            values.append(coherence_exact(system, cpmg(n, tau)))
        elif method == "filter":
            values.append(coherence_filter(system.A, system.omega, n, tau, system.control))
        else:
            values.append(coherence_gaussian(system.A, system.omega, n, tau, system.control))
    return CoherenceCurve(np.array(times), np.array(values), method)


@dataclass(frozen=True)
class CpmgPlan:
    n_pulses: int

    @property
    def total_pulses(self) -> int:
        return self.n_pulses

    def sequence(self, tau0: float) -> PulseSequence:
        return cpmg(self.n_pulses, tau0)

    def marks(self) -> np.ndarray:
        """Segment boundaries in units of tau0."""
        return cpmg(self.n_pulses, 1.0).boundaries()


@dataclass(frozen=True)
class SlicePlan:
    slices: int
    pulses_per_slice: int
    c: float
    k: int = 0

    @property
    def total_pulses(self) -> int:
        return self.slices * self.pulses_per_slice

    def spec(self, tau0: float) -> SliceSpec:
        return SliceSpec.from_tau0(self.slices, self.pulses_per_slice, tau0, self.c, self.k)

    def sequence(self, tau0: float) -> PulseSequence:
        return sliced_alternating(self.spec(tau0))

    def marks(self) -> np.ndarray:
        return self.sequence(1.0).boundaries()


@dataclass(frozen=True, eq=False)
class SensingScan:
    omega_tau0: np.ndarray
    coh_exact: np.ndarray
    coh_filter: np.ndarray
    coh_gaussian: np.ndarray
    plan: object
    G: np.ndarray | None = None
    F_block: np.ndarray | None = None

    def columns(self) -> dict[str, np.ndarray]:
        cols = {
            "omega_tau0": self.omega_tau0,
            "coh_exact": self.coh_exact,
            "coh_filter": self.coh_filter,
            "coh_gaussian": self.coh_gaussian,
        }
        if self.G is not None:
            cols["G"] = self.G
            cols["F_block"] = self.F_block
        return cols


def _grating_overlay(x: np.ndarray, plan: SlicePlan) -> tuple[np.ndarray, np.ndarray]:
    """Grating G and dimensionless block filter, with F^2 = (G / M^2) F_block^2."""
    n = plan.pulses_per_slice
    M, m = plan.slices // 2, 2 * n
    scale = plan.c / ((2 * plan.k + 1) * n)
    x_plus, x_minus = x * (1 + scale), x * (1 - scale)
    # chi at omega = 1, i.e. in units of 1/omega
    chi_p = weak_filter_arrays(x_plus, n)[0]
    chi_m = weak_filter_arrays(x_minus, n)[0]
    block = np.abs(chi_p + (-1) ** n * np.exp(2j * n * x_plus) * chi_m) / (2 * n * (x_plus + x_minus))
    G = grating(2 * n * M * (x_plus + x_minus), M, m)
    return np.asarray(G), block


def sensing_scan(system: SpinSystem, plan, omega_tau0) -> SensingScan:
    """Coherence at every omega tau0 with the pulse count held fixed.

    Exact branches for the whole grid are evaluated in one batch. The
    filter column uses cos(A t F) with F from the full-sequence segment sum.
    Alternating plans with an even slice count also get the grating G and
    the block filter normalized to one block duration, so F^2 = G F_block^2 / M^2.
    """
    x = np.atleast_1d(np.asarray(omega_tau0, dtype=float))
    if np.any(x <= 0):
        raise ValueError("omega tau0 grid must be positive")
    if not system.omega > 0:
        raise ValueError("sensing scans need omega > 0")
    marks = plan.marks()
    signs = np.where(np.arange(len(marks) - 1) % 2 == 0, 1.0, -1.0)
    tau0 = x / system.omega
    durations = tau0[:, None] * np.diff(marks)[None, :]
    u_p = evolve_segments(system, signs, durations, 1)
    u_m = evolve_segments(system, signs, durations, -1)
    exact = 0.5 * np.trace(dagger(u_p) @ u_m, axis1=-2, axis2=-1).real

    total_marks = marks[-1]
    # chi at omega = 1 for boundaries x * marks, then F = |chi| / (x total)
    seg = _segment_exp_integral(1.0, x[:, None] * marks[None, :-1], x[:, None] * marks[None, 1:])
    F = np.abs(np.sum(signs * seg, axis=-1)) / (x * total_marks)
    phase = _effective_coupling(system.A, system.control) * tau0 * total_marks * F
    coh_filter = np.cos(phase)
    coh_gauss = np.exp(-0.5 * phase**2)

    G = block = None
    if isinstance(plan, SlicePlan) and plan.slices % 2 == 0:
        G, block = _grating_overlay(x, plan)
    return SensingScan(x, exact, coh_filter, coh_gauss, plan, G, block)
