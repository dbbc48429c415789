"""Gate filter functions for pi-pulse sequences.

Closed forms are provided for equidistant (CPMG) sequences in the weak
(``A << omega``) and strong (``A >> omega``) coupling limits. Every closed
form has an exact segment-sum counterpart valid for arbitrary sequences;
the closed forms switch to it inside a narrow guard band around their
removable singularities.

Frequencies are angular (rad/s), times in seconds. The complex integrals
``chi`` carry units of seconds and the filters ``F = |chi| / t`` are
dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sequences import PulseSequence, SliceSpec, cpmg, sliced_alternating

# half-width of the guard band (in the trigonometric argument) around removable singularities
GUARD = 1e-6

# leading constant of the closed weak-coupling filter; patched by `spinfilt validate --mutate`
_WEAK_PREFACTOR = 2.0


def _wrap(angle):
    """Map angles into (-pi, pi]."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, 2 * np.pi) - np.pi
    wrapped = np.where(wrapped == -np.pi, np.pi, wrapped)
    return wrapped if np.ndim(wrapped) else float(wrapped)


def _segment_exp_integral(freq, start, stop):
    """Integral of exp(i freq t) over [start, stop], regular at freq = 0."""
    length = stop - start
    mid = 0.5 * (start + stop)
    return length * np.exp(1j * freq * mid) * np.sinc(freq * length / (2 * np.pi))


def _cpmg_boundaries(tau, n_pulses: int):
    """Boundaries [0, tau, 3tau, ..., (2N-1)tau, 2N tau] broadcast over ``tau``."""
    tau = np.asarray(tau, dtype=float)
    marks = np.concatenate(([0.0], 2 * np.arange(1, n_pulses + 1) - 1.0, [2.0 * n_pulses]))
    return tau[..., None] * marks


def _signs(n_segments: int) -> np.ndarray:
    return np.where(np.arange(n_segments) % 2 == 0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# weak coupling


@dataclass(frozen=True)
class FilterResult:
    """Weak-coupling filter at one (sequence, frequency) pair.

    The rotation axis is ``axis_sign * (cos(phi) sigma_x - sin(phi) sigma_y)``;
    ``axis_sign = (-1)^k`` for the nearest resonance order ``k`` and ``phi``
    lies in (-pi, pi].
    """

    chi: complex
    F: float
    phi: float
    axis_sign: int
    total_time: float

    @property
    def axis(self) -> tuple[float, float, float]:
        """Unit vector of the rotation axis in (x, y, z) components."""
        return (self.axis_sign * math.cos(self.phi), -self.axis_sign * math.sin(self.phi), 0.0)


def chi_weak_oracle(omega, seq: PulseSequence):
    """chi = integral_0^t exp(i omega t') s(t') dt', summed over constant-sign segments.

    ``omega`` may be an array; the result has the same shape.
    """
    omega = np.asarray(omega, dtype=float)
    b = seq.boundaries()
    signs = seq.signs()
    seg = _segment_exp_integral(omega[..., None], b[:-1], b[1:])
    out = np.sum(signs * seg, axis=-1)
    return complex(out) if out.ndim == 0 else out


def _chi_weak_oracle_cpmg(omega_tau, n_pulses: int):
    """Oracle chi for CPMG at omega = 1, vectorized over omega*tau."""
    b = _cpmg_boundaries(omega_tau, n_pulses)
    seg = _segment_exp_integral(1.0, b[..., :-1], b[..., 1:])
    return np.sum(_signs(n_pulses + 1) * seg, axis=-1)


def _chi_weak_closed(omega_tau, n_pulses: int):
    """Geometric-series closed form of chi for CPMG at omega = 1."""
    x = np.asarray(omega_tau, dtype=float)
    t = 2 * n_pulses * x
    nx = n_pulses * x
    if n_pulses % 2 == 0:
        branch = -1j * np.sin(nx)
    else:
        branch = np.cos(nx)
    return 1j * (1 - (-1) ** n_pulses * np.exp(1j * t) - 2 * np.exp(1j * nx) / np.cos(x) * branch)


def _filter_weak_closed(omega_tau, n_pulses: int):
    x = np.asarray(omega_tau, dtype=float)
    shift = 0.0 if n_pulses % 2 == 0 else np.pi / 2
    return _WEAK_PREFACTOR / (n_pulses * x) * np.abs(np.sin(x / 2) ** 2 / np.cos(x) * np.sin(n_pulses * x + shift))


def weak_guard_mask(omega_tau):
    """True where the closed weak-coupling forms are replaced by the oracle."""
    x = np.asarray(omega_tau, dtype=float)
    return (np.abs(np.cos(x)) < GUARD) | (np.abs(x) < GUARD)


def weak_resonance_order(omega_tau):
    """Nearest k with omega tau ~ (2k+1) pi/2 (k >= 0)."""
    x = np.asarray(omega_tau, dtype=float)
    k = np.maximum(0, np.rint(np.abs(x) / np.pi - 0.5)).astype(int)
    return k if k.ndim else int(k)


def weak_resonance_param(omega_tau, n_pulses: int):
    """Detuning c from the nearest resonance, omega tau = (2k+1) pi/2 + c pi/(2N)."""
    x = np.asarray(omega_tau, dtype=float)
    k = weak_resonance_order(x)
    c = (x - (2 * np.asarray(k) + 1) * np.pi / 2) * 2 * n_pulses / np.pi
    return c if np.ndim(c) else float(c)


def weak_filter_arrays(omega_tau, n_pulses: int):
    """Vectorized weak filter for CPMG.

    Returns ``(chi, F, phi, axis_sign)`` with ``chi`` in units of 1/omega
    (i.e. evaluated at omega = 1). Closed forms are used outside the guard
    band, the segment oracle inside it.
    """
    if n_pulses < 1:
        raise ValueError("N must be at least 1")
    x = np.atleast_1d(np.asarray(omega_tau, dtype=float))
    guard = weak_guard_mask(x)
    chi = np.empty(x.shape, dtype=complex)
    F = np.empty(x.shape)
    safe = ~guard
    with np.errstate(divide="ignore", invalid="ignore"):
        chi[safe] = _chi_weak_closed(x[safe], n_pulses)
        F[safe] = _filter_weak_closed(x[safe], n_pulses)
    if guard.any():
        chi[guard] = _chi_weak_oracle_cpmg(x[guard], n_pulses)
        t = 2 * n_pulses * np.abs(x[guard])
        F[guard] = np.where(t > 0, np.abs(chi[guard]) / np.where(t > 0, t, 1.0), 0.0)
    k = weak_resonance_order(x)
    axis_sign = np.where(k % 2 == 0, 1, -1)
    phi = _wrap(np.angle(chi) - k * np.pi)
    return chi, F, np.asarray(phi), axis_sign


def filter_weak(omega: float, n_pulses: int, tau: float) -> FilterResult:
    """Weak-coupling gate filter of an ``N``-pulse CPMG sequence."""
    if n_pulses < 1:
        raise ValueError("N must be at least 1")
    if not tau > 0:
        raise ValueError("tau must be positive")
    x = omega * tau
    if omega == 0:
        chi = chi_weak_oracle(0.0, cpmg(n_pulses, tau))
        return FilterResult(chi, abs(chi) / (2 * n_pulses * tau), 0.0, 1, 2 * n_pulses * tau)
    chi, F, phi, sign = weak_filter_arrays(x, n_pulses)
    return FilterResult(complex(chi[0]) / omega, float(F[0]), float(phi[0]), int(sign[0]), 2 * n_pulses * tau)


def filter_weak_universal(c, k: int = 0):
    """Large-N resonance shape (4/pi^2) |sin(c pi/2)| / (|c| (2k+1)), limit 2/(pi(2k+1)) at c = 0."""
    c = np.asarray(c, dtype=float)
    # sin(c pi/2)/c = (pi/2) sinc(c/2)
    out = (2 / np.pi) * np.abs(np.sinc(c / 2)) / (2 * k + 1)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# strong coupling, spin-1 control


@dataclass(frozen=True)
class StrongFilterResult:
    """Strong-coupling (spin-1 control) conditional and unconditional filters.

    ``sign_branch`` is the sign in S_z = (s_z s(t) +- 1)/2. Axes:
    conditional ``-sign_branch * (cos(phi_c) sigma_z + sign_branch sin(phi_c) sigma_y)``,
    unconditional ``cos(phi_u) sigma_z + sign_branch sin(phi_u) sigma_y``.
    """

    chi_c: complex
    chi_u: complex
    F_c: float
    F_u: float
    phi_c: float
    phi_u: float
    sign_branch: int
    total_time: float

    @property
    def axis_c(self) -> tuple[float, float, float]:
        s = self.sign_branch
        return (0.0, -math.sin(self.phi_c), -s * math.cos(self.phi_c))

    @property
    def axis_u(self) -> tuple[float, float, float]:
        s = self.sign_branch
        return (0.0, s * math.sin(self.phi_u), math.cos(self.phi_u))


def _check_sign(sign: int) -> None:
    if sign not in (1, -1):
        raise ValueError("sign branch must be +1 or -1")


def chi_strong_oracle(A, seq: PulseSequence, sign: int = 1):
    """Exact ``(chi_c, chi_u)`` for a spin-1 control and an arbitrary sequence.

    chi_c = i int sin((A/2) s_F(t)) exp(+-i (A/2) t) dt and
    chi_u = int cos((A/2) s_F(t)) exp(+-i (A/2) t) dt, where s_F is linear on
    every segment so each piece integrates in closed form.
    """
    _check_sign(sign)
    A = np.asarray(A, dtype=float)
    b = seq.boundaries()
    signs = seq.signs()
    start, stop = b[:-1], b[1:]
    f0 = np.concatenate(([0.0], np.cumsum(signs * (stop - start))[:-1]))
    a = A[..., None]
    # exp(+-i (A/2) s_F(t)) = exp(+-i (A/2)(f0 - sigma start)) exp(+-i (A/2) sigma t)
    phase0 = 0.5 * a * (f0 - signs * start)
    e_plus = np.exp(1j * phase0) * _segment_exp_integral(0.5 * a * (signs + sign), start, stop)
    e_minus = np.exp(-1j * phase0) * _segment_exp_integral(0.5 * a * (sign - signs), start, stop)
    chi_c = 0.5 * np.sum(e_plus - e_minus, axis=-1)
    chi_u = 0.5 * np.sum(e_plus + e_minus, axis=-1)
    if chi_c.ndim == 0:
        return complex(chi_c), complex(chi_u)
    return chi_c, chi_u


def _chi_strong_oracle_cpmg(a_tau, n_pulses: int, sign: int):
    """Oracle at A = 1 vectorized over A*tau."""
    x = np.atleast_1d(np.asarray(a_tau, dtype=float))
    out_c = np.empty(x.shape, dtype=complex)
    out_u = np.empty(x.shape, dtype=complex)
    b = _cpmg_boundaries(x, n_pulses)
    signs = _signs(n_pulses + 1)
    start, stop = b[..., :-1], b[..., 1:]
    f0 = np.concatenate((np.zeros(x.shape + (1,)), np.cumsum(signs * (stop - start), axis=-1)[..., :-1]), axis=-1)
    phase0 = 0.5 * (f0 - signs * start)
    e_plus = np.exp(1j * phase0) * _segment_exp_integral(0.5 * (signs + sign), start, stop)
    e_minus = np.exp(-1j * phase0) * _segment_exp_integral(0.5 * (sign - signs), start, stop)
    out_c[...] = 0.5 * np.sum(e_plus - e_minus, axis=-1)
    out_u[...] = 0.5 * np.sum(e_plus + e_minus, axis=-1)
    return out_c, out_u


def _chi_strong_closed(a_tau, n_pulses: int, sign: int):
    """Closed ``(chi_c, chi_u)`` for CPMG at A = 1."""
    x = np.asarray(a_tau, dtype=float)
    N = n_pulses
    half = 0.5 * x
    if N % 2 == 0:
        branch = sign * 1j * np.sin(half * N)
    else:
        branch = -np.cos(half * N)
    chi_c = (1 - (-1) ** N * np.exp(sign * 1j * x * N)) * (0.5j - sign * x / 2) + np.exp(sign * 1j * half * N) * (
        1j - sign * x / np.cos(half) * np.exp(sign * 1j * half)
    ) * branch
    chi_u = (1 - np.exp(sign * 1j * x * N)) * (sign * 0.5j + x / 2) + np.exp(sign * 1j * half * N) * (
        1 + x / np.sin(half) * np.exp(sign * 1j * half)
    ) * np.sin(half * N)
    return chi_c, chi_u


def _filters_strong_closed(a_tau, n_pulses: int):
    x = np.asarray(a_tau, dtype=float)
    N = n_pulses
    shift = 0.0 if N % 2 == 0 else np.pi / 2
    F_c = np.abs(np.sin(N * x / 2 + shift) * np.tan(x / 2)) / (2 * N)
    F_u = np.abs((2 / x + 1 / np.tan(x / 2)) * np.sin(N * x / 2)) / (2 * N)
    return F_c, F_u


def strong_guard_mask(a_tau):
    x = np.asarray(a_tau, dtype=float)
    return (np.abs(np.sin(x / 2)) < GUARD) | (np.abs(np.cos(x / 2)) < GUARD)


def strong_filter_arrays(a_tau, n_pulses: int, sign: int = 1):
    """Vectorized strong filter for CPMG, chi in units of 1/A.

    Returns ``(chi_c, chi_u, F_c, F_u, phi_c, phi_u)``.
    """
    _check_sign(sign)
    if n_pulses < 1:
        raise ValueError("N must be at least 1")
    x = np.atleast_1d(np.asarray(a_tau, dtype=float))
    guard = strong_guard_mask(x)
    safe = ~guard
    chi_c = np.empty(x.shape, dtype=complex)
    chi_u = np.empty(x.shape, dtype=complex)
    F_c = np.empty(x.shape)
    F_u = np.empty(x.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        chi_c[safe], chi_u[safe] = _chi_strong_closed(x[safe], n_pulses, sign)
        F_c[safe], F_u[safe] = _filters_strong_closed(x[safe], n_pulses)
    if guard.any():
        gc, gu = _chi_strong_oracle_cpmg(x[guard], n_pulses, sign)
        chi_c[guard], chi_u[guard] = gc, gu
        t = 2 * n_pulses * x[guard]
        F_c[guard] = np.abs(gc) / t
        F_u[guard] = np.abs(gu) / t
    a_c = np.angle(chi_c)
    a_u = np.angle(chi_u)
    phi_c = np.arctan2(-np.sin(a_c), -sign * np.cos(a_c))
    phi_u = np.arctan2(sign * np.sin(a_u), np.cos(a_u))
    return chi_c, chi_u, F_c, F_u, _wrap(phi_c), _wrap(phi_u)


def filters_strong(A: float, n_pulses: int, tau: float, sign: int = 1) -> StrongFilterResult:
    """Strong-coupling filters of an ``N``-pulse CPMG sequence for a spin-1 control."""
    if not (A > 0 and tau > 0):
        raise ValueError("A and tau must be positive")
    chi_c, chi_u, F_c, F_u, phi_c, phi_u = strong_filter_arrays(A * tau, n_pulses, sign)
    return StrongFilterResult(
        complex(chi_c[0]) / A,
        complex(chi_u[0]) / A,
        float(F_c[0]),
        float(F_u[0]),
        float(phi_c[0]),
        float(phi_u[0]),
        sign,
        2 * n_pulses * tau,
    )


def filter_strong_universal(c):
    """sin(c pi/2) / (c pi), equal to 1/2 at c = 0."""
    c = np.asarray(c, dtype=float)
    out = 0.5 * np.sinc(c / 2)
    return float(out) if out.ndim == 0 else out


def strong_resonance_param(a_tau, n_pulses: int, branch: str = "conditional"):
    """``(k, c)`` of the nearest conditional ((2k+1) pi) or unconditional (2 k pi) resonance."""
    x = float(a_tau)
    if branch == "conditional":
        k = max(0, round((x / math.pi - 1) / 2))
        base = (2 * k + 1) * math.pi
    elif branch == "unconditional":
        k = max(0, round(x / (2 * math.pi)))
        base = 2 * k * math.pi
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return k, (x - base) * n_pulses / math.pi


# ---------------------------------------------------------------------------
# strong coupling, spin-1/2 control


def zeta_half_oracle(A, seq: PulseSequence):
    """zeta = integral_0^t exp(i A s_F(t')) dt' for a spin-1/2 control."""
    A = np.asarray(A, dtype=float)
    b = seq.boundaries()
    signs = seq.signs()
    start, stop = b[:-1], b[1:]
    f0 = np.concatenate(([0.0], np.cumsum(signs * (stop - start))[:-1]))
    a = A[..., None]
    seg = np.exp(1j * a * (f0 - signs * start)) * _segment_exp_integral(a * signs, start, stop)
    out = np.sum(seg, axis=-1)
    return complex(out) if out.ndim == 0 else out


def filters_strong_half(A: float, n_pulses: int, tau: float) -> tuple[float, float]:
    """Conditional (sigma_y) and unconditional (sigma_z) filters for a spin-1/2 control.

    The conditional part never accumulates: it vanishes for even N and decays
    as 1/N for odd N.
    """
    if n_pulses < 1:
        raise ValueError("N must be at least 1")
    x = A * tau
    if not x > 0:
        raise ValueError("A*tau must be positive")
    F_c = 0.0 if n_pulses % 2 == 0 else (1 - math.cos(x)) / (n_pulses * x)
    F_u = math.sin(x) / x
    return F_c, F_u


# ---------------------------------------------------------------------------
# second order


def second_order_integral(omega: float, seq: PulseSequence) -> float:
    """Signed double integral of sin(omega (t1 - t2)) s(t1) s(t2) over t2 <= t1.

    Off-diagonal segment pairs factor into Im(E_i conj(E_j)) with
    E_i = s_i int_seg exp(i omega t); a diagonal segment of length L
    contributes (omega L - sin(omega L)) / omega^2.
    """
    if omega == 0:
        return 0.0
    b = seq.boundaries()
    signs = seq.signs()
    start, stop = b[:-1], b[1:]
    E = signs * _segment_exp_integral(omega, start, stop)
    prefix = np.concatenate(([0.0], np.cumsum(E)[:-1]))
    cross = np.sum((E * np.conj(prefix)).imag)
    L = stop - start
    x = omega * L
    small = np.abs(x) < 1e-3
    diag = np.where(
        small,
        L**2 * (x / 6 - x**3 / 120 + x**5 / 5040),
        (x - np.sin(x)) / np.where(small, 1.0, omega**2),
    )
    return float(cross + np.sum(diag))


def second_order_filter(omega: float, seq: PulseSequence) -> float:
    """Magnitude of the second-order (sigma_z x 1) filter, normalized by t^2."""
    return abs(second_order_integral(omega, seq)) / seq.total_time**2


# ---------------------------------------------------------------------------
# grating / block decomposition


def _grating_sum(omega_t, M: int, m: int):
    # |sum_k ((-1)^m)^k exp(i k omega t / M)|^2, the defining geometric sum
    step = np.asarray(omega_t, dtype=float) / M + (np.pi if m % 2 else 0.0)
    k = np.arange(M)
    return np.abs(np.sum(np.exp(1j * np.multiply.outer(step, k)), axis=-1)) ** 2


def grating(omega_t, M: int, m: int):
    """Grating factor of an M-fold repetition of an m-pulse block.

    The geometric sum is bounded by M^2, so every zero of a denominator is
    removable; inside the guard band the defining sum is evaluated directly.
    """
    if M < 1 or m < 1:
        raise ValueError("M and m must be positive")
    x = np.asarray(omega_t, dtype=float)
    half = x / 2
    arg = x / (2 * M)
    if m % 2 == 0:
        denom = np.sin(arg)
        num = np.sin(half)
    else:
        denom = np.cos(arg)
        num = np.sin(half) if M % 2 == 0 else np.cos(half)
    guard = np.abs(denom) < GUARD
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(guard, 0.0, num**2 / np.where(guard, 1.0, denom**2))
    if np.any(guard):
        out = np.where(guard, _grating_sum(x, M, m), out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GratingDecomposition:
    M: int
    m: int
    G: float
    F_block: float
    total: float
    total_time: float

    @property
    def product(self) -> float:
        """G F_block^2 / t^2, the decomposed form of ``total``."""
        return self.G * self.F_block**2 / self.total_time**2

    @property
    def residual(self) -> float:
        return abs(self.total - self.product)


def _chi_cpmg(omega: float, n_pulses: int, tau: float) -> complex:
    chi, _, _, _ = weak_filter_arrays(omega * tau, n_pulses)
    return complex(chi[0]) / omega


def block_filter(omega: float, spec: SliceSpec) -> float:
    """|chi_n(tau_+) + (-1)^n exp(2i n omega tau_+) chi_n(tau_-)| for one +c/-c block (seconds)."""
    n = spec.pulses_per_slice
    if omega == 0:
        first = chi_weak_oracle(0.0, cpmg(n, spec.tau_plus))
        second = chi_weak_oracle(0.0, cpmg(n, spec.tau_minus))
    else:
        first = _chi_cpmg(omega, n, spec.tau_plus)
        second = _chi_cpmg(omega, n, spec.tau_minus)
    return abs(first + (-1) ** n * np.exp(2j * n * omega * spec.tau_plus) * second)


def grating_block_decompose(omega: float, spec: SliceSpec) -> GratingDecomposition:
    """Split the squared filter of an alternating sequence into grating and block parts.

    ``total`` is evaluated independently from the full sequence so that
    ``residual`` checks the factorization.
    """
    if spec.slices % 2:
        raise ValueError("grating decomposition needs an even number of slices")
    M = spec.slices // 2
    m = 2 * spec.pulses_per_slice
    seq = sliced_alternating(spec)
    t = seq.total_time
    G = grating(omega * t, M, m)
    F_block = block_filter(omega, spec)
    total = abs(chi_weak_oracle(omega, seq)) ** 2 / t**2
    return GratingDecomposition(M, m, float(G), float(F_block), float(total), t)
