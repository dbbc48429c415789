"""Exact and filter-predicted evolution of a target spin coupled to a control spin.

The Hamiltonian is H = (omega/2) sigma_z + (A/2) sigma_x (x) S_z(t) with either
S_z = s_z s(t) (spin-1/2 control) or S_z = (s_z s(t) +- 1)/2 (spin-1 control).
It never mixes control branches, so every two-spin operator is stored as a
pair of 2x2 target-spin blocks, one per eigenvalue s_z = +1 / -1.

State vectors are ordered target (x) control with basis |up> = (1, 0) and
|down> = (0, 1) on both spins; the control |up> carries s_z = +1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .filters import filter_weak, filters_strong
from .sequences import PulseSequence, SliceSpec, cpmg, slice_boundaries
from .spin import (
    DOWN,
    IDENTITY,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    UP,
    AxisAngle,
    dagger,
    generator_exp,
    is_unitary,
    pauli_exp_batch,
    rotation,
    rotation_angle_axis,
    state_fidelity,
    unitary_fidelity,
)


class ControlKind(enum.Enum):
    HALF = "half"
    ONE_PLUS = "one+"
    ONE_MINUS = "one-"

    @property
    def is_spin_one(self) -> bool:
        return self is not ControlKind.HALF

    @property
    def sign(self) -> int:
        """The +- of S_z = (s_z s(t) +- 1)/2; +1 for a spin-1/2 control."""
        return -1 if self is ControlKind.ONE_MINUS else 1


@dataclass(frozen=True)
class SpinSystem:
    omega: float
    A: float
    control: ControlKind = ControlKind.HALF

    def __post_init__(self):
        if not self.omega >= 0:
            raise ValueError("omega must be non-negative")
        object.__setattr__(self, "control", ControlKind(self.control))

    @property
    def regime(self) -> str:
        """Advisory label: 'weak' (A/omega <= 0.1), 'strong' (omega/A <= 0.1) or 'intermediate'."""
        if self.omega > 0 and abs(self.A) / self.omega <= 0.1:
            return "weak"
        if self.A != 0 and self.omega / abs(self.A) <= 0.1:
            return "strong"
        return "intermediate"

    @property
    def weak_coupling(self) -> float:
        """Coupling entering the weak-coupling filter (A/2 for a spin-1 control)."""
        return 0.5 * self.A if self.control.is_spin_one else self.A


@dataclass(frozen=True, eq=False)
class ConditionalUnitary:
    u_plus: np.ndarray
    u_minus: np.ndarray

    def __post_init__(self):
        for name in ("u_plus", "u_minus"):
            u = np.asarray(getattr(self, name), dtype=complex)
            if u.shape != (2, 2):
                raise ValueError(f"{name} must be 2x2")
            object.__setattr__(self, name, u)

    def branch(self, s_z: int) -> np.ndarray:
        return self.u_plus if s_z == 1 else self.u_minus

    def is_unitary(self, tol: float = 1e-12) -> bool:
        return is_unitary(self.u_plus, tol) and is_unitary(self.u_minus, tol)

    def __matmul__(self, other: "ConditionalUnitary") -> "ConditionalUnitary":
        return ConditionalUnitary(self.u_plus @ other.u_plus, self.u_minus @ other.u_minus)

    def dagger(self) -> "ConditionalUnitary":
        return ConditionalUnitary(dagger(self.u_plus), dagger(self.u_minus))

    def local(self, left: np.ndarray, right: np.ndarray | None = None) -> "ConditionalUnitary":
        """Sandwich both branches with target-only operators: left U right."""
        right = IDENTITY if right is None else right
        return ConditionalUnitary(left @ self.u_plus @ right, left @ self.u_minus @ right)

    def swapped(self) -> "ConditionalUnitary":
        """Same operator with s_z -> -s_z."""
        return ConditionalUnitary(self.u_minus, self.u_plus)

    def apply(self, state) -> np.ndarray:
        psi = np.asarray(state, dtype=complex).reshape(2, 2)  # [target, control]
        out = np.empty_like(psi)
        out[:, 0] = self.u_plus @ psi[:, 0]
        out[:, 1] = self.u_minus @ psi[:, 1]
        return out.reshape(4)

    def full(self) -> np.ndarray:
        """Dense 4x4 matrix in the target (x) control basis (diagnostics only)."""
        out = np.zeros((4, 4), dtype=complex)
        out[0::2, 0::2] = self.u_plus
        out[1::2, 1::2] = self.u_minus
        return out


def identity_pair() -> ConditionalUnitary:
    return ConditionalUnitary(IDENTITY, IDENTITY)


def conditional_rotation(axis, theta: float) -> ConditionalUnitary:
    """exp(-i (theta/2) n.sigma (x) s_z)."""
    return ConditionalUnitary(rotation(axis, theta), rotation(axis, -theta))


def product_state(target, control) -> np.ndarray:
    return np.kron(np.asarray(target, dtype=complex), np.asarray(control, dtype=complex))


def down_plus_state() -> np.ndarray:
    """|down> (x) (|down> + |up>)/sqrt(2)."""
    return product_state(DOWN, (DOWN + UP) / math.sqrt(2))


# ---------------------------------------------------------------------------
# exact evolution


def _branch_fields(system: SpinSystem, signs: np.ndarray, s_z: int) -> np.ndarray:
    """Field vectors h (H = h.sigma) on each constant-sign segment."""
    if system.control.is_spin_one:
        value = 0.5 * (s_z * signs + system.control.sign)
    else:
        value = s_z * signs
    h = np.zeros(np.shape(signs) + (3,))
    h[..., 0] = 0.5 * system.A * value
    h[..., 2] = 0.5 * system.omega
    return h


def ordered_product(mats: np.ndarray) -> np.ndarray:
    """M_{S-1} ... M_1 M_0 over axis -3, by pairwise reduction."""
    mats = np.asarray(mats)
    while mats.shape[-3] > 1:
        if mats.shape[-3] % 2:
            pad = np.broadcast_to(IDENTITY, mats.shape[:-3] + (1, 2, 2))
            mats = np.concatenate((mats, pad), axis=-3)
        mats = mats[..., 1::2, :, :] @ mats[..., 0::2, :, :]
    return mats[..., 0, :, :]


def evolve_segments(system: SpinSystem, signs: np.ndarray, durations: np.ndarray, s_z: int) -> np.ndarray:
    """Branch propagator for segments with the given signs and durations.

    ``durations`` may carry leading batch dimensions ``(..., S)``; the result
    has shape ``(..., 2, 2)``.
    """
    h = _branch_fields(system, np.asarray(signs, dtype=float), s_z)
    return ordered_product(pauli_exp_batch(h, durations))


def evolve_exact(system: SpinSystem, seq: PulseSequence) -> ConditionalUnitary:
    """Lab-frame propagator over the whole sequence, both control branches."""
    signs, durations = seq.signs(), seq.durations()
    return ConditionalUnitary(
        evolve_segments(system, signs, durations, 1),
        evolve_segments(system, signs, durations, -1),
    )


def evolve_trajectory(system: SpinSystem, seq: PulseSequence, times: Sequence[float]) -> list[ConditionalUnitary]:
    """Lab-frame propagators U(t) for every (sorted) sample time."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("sample times must be sorted")
    if times.size and (times[0] < 0 or times[-1] > seq.total_time * (1 + 1e-12)):
        raise ValueError("sample times must lie in [0, t_f]")
    fields = {sz: None for sz in (1, -1)}
    current = {1: IDENTITY.copy(), -1: IDENTITY.copy()}
    out: list[ConditionalUnitary] = []
    segments = list(seq.segments())
    seg_index = 0
    clock = 0.0
    for t in times:
        while seg_index < len(segments) and segments[seg_index][1] <= t:
            _, stop, sign = segments[seg_index]
            for sz in (1, -1):
                fields[sz] = _branch_fields(system, np.array(sign, dtype=float), sz)
                current[sz] = generator_exp(fields[sz], stop - clock) @ current[sz]
            clock = stop
            seg_index += 1
        if t > clock and seg_index < len(segments):
            sign = segments[seg_index][2]
            pair = []
            for sz in (1, -1):
                h = _branch_fields(system, np.array(sign, dtype=float), sz)
                pair.append(generator_exp(h, t - clock) @ current[sz])
            out.append(ConditionalUnitary(*pair))
        else:
            out.append(ConditionalUnitary(current[1].copy(), current[-1].copy()))
    return out


# ---------------------------------------------------------------------------
# frames


def frame_rotation(system: SpinSystem, t: float, frame: str = "weak") -> np.ndarray:
    """exp(+i H0 t) with H0 = (omega/2) sigma_z (weak) or +-(A/4) sigma_x (strong)."""
    if frame == "weak":
        return rotation((0.0, 0.0, 1.0), -system.omega * t)
    if frame == "strong":
        if not system.control.is_spin_one:
            raise ValueError("the strong-coupling frame is defined for a spin-1 control only")
        return rotation((1.0, 0.0, 0.0), -system.control.sign * 0.5 * system.A * t)
    raise ValueError(f"unknown frame {frame!r}")


def to_rotating_frame(system: SpinSystem, u: ConditionalUnitary, t: float, frame: str = "weak") -> ConditionalUnitary:
    """U_int = exp(i H0 t) U on both branches.

    In the strong frame this coincides with the full hyperfine interaction
    picture at times where s_F(t) = 0, e.g. at the end of every CPMG block.
    """
    return u.local(frame_rotation(system, t, frame))


def from_rotating_frame(system: SpinSystem, u: ConditionalUnitary, t: float, frame: str = "weak") -> ConditionalUnitary:
    return u.local(dagger(frame_rotation(system, t, frame)))


# ---------------------------------------------------------------------------
# filter predictions


@dataclass(frozen=True)
class GatePrediction:
    theta: float
    axis: AxisAngle
    unconditional_axis: AxisAngle | None = None
    source: str = "weak"
    filter: object = field(default=None, repr=False, compare=False)


def _weak_slice_unitary(system: SpinSystem, n_pulses: int, tau: float):
    res = filter_weak(system.omega, n_pulses, tau)
    theta = system.weak_coupling * res.total_time * res.F
    return res, theta, conditional_rotation(res.axis, theta)


def predict_weak(system: SpinSystem, n_pulses: int, tau: float) -> tuple[GatePrediction, ConditionalUnitary]:
    """First-order conditional rotation exp(-i theta/2 sigma_phi (x) s_z) in the omega frame."""
    res, theta, pair = _weak_slice_unitary(system, n_pulses, tau)
    return GatePrediction(theta, AxisAngle(res.axis, theta), None, "weak", res), pair


def _strong_slice_unitary(system: SpinSystem, n_pulses: int, tau: float):
    if not system.control.is_spin_one:
        raise ValueError(
            "strong-coupling gate prediction needs a spin-1 control; a spin-1/2 control has no "
            "scalable conditional term (see filters_strong_half)"
        )
    res = filters_strong(system.A, n_pulses, tau, system.control.sign)
    branches = []
    for s_z in (1, -1):
        z = res.chi_u + s_z * res.chi_c
        h = 0.5 * system.omega * np.array([0.0, z.imag, z.real])
        branches.append(generator_exp(h, 1.0))
    return res, ConditionalUnitary(*branches)


def predict_strong(system: SpinSystem, n_pulses: int, tau: float) -> tuple[GatePrediction, ConditionalUnitary]:
    """First-order evolution in the hyperfine frame: conditional plus unconditional rotation."""
    res, pair = _strong_slice_unitary(system, n_pulses, tau)
    t = res.total_time
    theta = system.omega * t * res.F_c
    pred = GatePrediction(
        theta,
        AxisAngle(res.axis_c, theta),
        AxisAngle(res.axis_u, system.omega * t * res.F_u),
        "strong",
        res,
    )
    return pred, pair


@dataclass(frozen=True, eq=False)
class SlicedPrediction:
    unitary: ConditionalUnitary
    theta_eff: float
    f_eff: float
    total_time: float
    frame: str


def compose_slices(system: SpinSystem, slices: Sequence[tuple[int, float]], frame: str = "weak") -> SlicedPrediction:
    """Compose per-slice filter predictions into one rotating-frame unitary.

    ``slices`` lists ``(n_j, tau_j)``; slice j is a CPMG block of n_j pulses.
    Each slice prediction is conjugated by exp(i H0 t_j) and its control
    branches are swapped when an odd number of pulses precedes it. The result
    is exp(i H0 t) U, i.e. the rotating frame at the final time.
    """
    total = identity_pair()
    start = 0.0
    preceding = 0
    weighted = 0.0
    for n_j, tau_j in slices:
        if frame == "weak":
            res, _, u_j = _weak_slice_unitary(system, n_j, tau_j)
            weighted += res.total_time * res.F
        elif frame == "strong":
            res, u_j = _strong_slice_unitary(system, n_j, tau_j)
            weighted += res.total_time * res.F_c
        else:
            raise ValueError(f"unknown frame {frame!r}")
        if preceding % 2:
            u_j = u_j.swapped()
        r = frame_rotation(system, start, frame)
        total = u_j.local(r, dagger(r)) @ total
        start += 2 * n_j * tau_j
        preceding += n_j
    f_eff = weighted / start
    rate = system.weak_coupling if frame == "weak" else system.omega
    return SlicedPrediction(total, rate * start * f_eff, f_eff, start, frame)


def sliced_evolution_predict(system: SpinSystem, spec: SliceSpec, frame: str = "weak") -> SlicedPrediction:
    """Filter prediction for an alternating +c/-c sequence (even slice count)."""
    if spec.slices % 2:
        raise ValueError("sliced prediction needs an even number of slices")
    return compose_slices(system, [(spec.pulses_per_slice, tau) for tau in spec.slice_taus()], frame)


def effective_filter(f_plus: float, f_minus: float, c: float, n: int) -> float:
    """Time-weighted filter of a k = 0 alternating sequence: ((n+c) F_+c + (n-c) F_-c) / (2n)."""
    return ((c + n) * f_plus + (n - c) * f_minus) / (2 * n)


def coordinate_rotation_angle(n_pulses: int, omega: float, tau: float, reduce: bool = False) -> float:
    """Frame rotation 2 n omega tau accumulated over one slice."""
    if n_pulses < 1:
        raise ValueError("slice must contain at least one pulse")
    angle = 2 * n_pulses * omega * tau
    return math.fmod(angle, 2 * math.pi) if reduce else angle


@dataclass(frozen=True)
class MagnusEstimate:
    error: float
    tier: str


def magnus_validity(theta: float) -> MagnusEstimate:
    """Relative size (theta/2)^2 of the neglected second-order term."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    err = (0.5 * theta) ** 2
    if err < 0.01:
        tier = "ok"
    elif err < 0.1:
        tier = "marginal"
    else:
        tier = "invalid"
    return MagnusEstimate(err, tier)


def gate_fidelity_report(actual: ConditionalUnitary, predicted: ConditionalUnitary, initial_state=None) -> float:
    """State fidelity from ``initial_state`` if given, else the mean branchwise unitary fidelity.

    The branchwise metric ignores a separate global phase on each branch,
    which is a relative phase on the two-spin state; the state metric does not.
    """
    if initial_state is None:
        return 0.5 * (
            unitary_fidelity(actual.u_plus, predicted.u_plus) + unitary_fidelity(actual.u_minus, predicted.u_minus)
        )
    return state_fidelity(predicted.apply(initial_state), actual.apply(initial_state))


def conditional_angle_axis(u: ConditionalUnitary, reference=None) -> tuple[float, np.ndarray]:
    """Rotation angle and axis of the s_z = +1 branch."""
    return rotation_angle_axis(u.u_plus, reference)


def max_norm_distance(a: ConditionalUnitary, b: ConditionalUnitary) -> float:
    return float(max(np.max(np.abs(a.u_plus - b.u_plus)), np.max(np.abs(a.u_minus - b.u_minus))))


# ---------------------------------------------------------------------------
# time-resolved gate simulation


@dataclass(frozen=True, eq=False)
class GateTrace:
    time: np.ndarray
    coherence: np.ndarray
    pop_down: np.ndarray
    fidelity: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelity[-1])


def sample_times(seq: PulseSequence, per_interval: int = 20) -> np.ndarray:
    """Every segment boundary plus ``per_interval`` uniform points inside each segment."""
    b = seq.boundaries()
    pts = [b[:1]]
    for a, c in zip(b[:-1], b[1:]):
        pts.append(np.linspace(a, c, per_interval + 2)[1:])
    return np.concatenate(pts)


def simulate_gate(
    system: SpinSystem,
    seq: PulseSequence,
    target_theta: float,
    target_axis,
    initial_state=None,
    per_interval: int = 20,
    frame: str = "weak",
) -> GateTrace:
    """Observables along the exact rotating-frame evolution.

    The reference trajectory is the ideal conditional rotation about
    ``target_axis`` whose angle grows linearly to ``target_theta`` at t_f.
    """
    psi0 = down_plus_state() if initial_state is None else np.asarray(initial_state, dtype=complex)
    times = sample_times(seq, per_interval)
    traj = evolve_trajectory(system, seq, times)
    target0 = psi0.reshape(2, 2)[:, 0]
    norm0 = np.linalg.norm(target0)
    phi0 = target0 / norm0 if norm0 > 0 else psi0.reshape(2, 2)[:, 1]
    rows = {k: [] for k in ("coh", "pop", "fid", "sx", "sy", "sz")}
    for t, u in zip(times, traj):
        u_rot = to_rotating_frame(system, u, t, frame)
        psi = u_rot.apply(psi0)
        ideal = conditional_rotation(target_axis, target_theta * t / seq.total_time).apply(psi0)
        rho_t = _target_density(psi)
        rows["coh"].append(np.vdot(u_rot.u_plus @ phi0, u_rot.u_minus @ phi0))
        rows["pop"].append(rho_t[1, 1].real)
        rows["fid"].append(state_fidelity(ideal, psi / np.linalg.norm(psi)))
        rows["sx"].append(np.trace(rho_t @ SIGMA_X).real)
        rows["sy"].append(np.trace(rho_t @ SIGMA_Y).real)
        rows["sz"].append(np.trace(rho_t @ SIGMA_Z).real)
    return GateTrace(
        times,
        np.array(rows["coh"]),
        np.array(rows["pop"]),
        np.array(rows["fid"]),
        np.array(rows["sx"]),
        np.array(rows["sy"]),
        np.array(rows["sz"]),
    )


def _target_density(psi: np.ndarray) -> np.ndarray:
    m = psi.reshape(2, 2)
    return m @ m.conj().T


def cpmg_unitary(system: SpinSystem, n_pulses: int, tau: float) -> ConditionalUnitary:
    return evolve_exact(system, cpmg(n_pulses, tau))


def slice_start_times(spec: SliceSpec) -> np.ndarray:
    return slice_boundaries(spec)[:-1]
