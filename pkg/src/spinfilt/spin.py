"""Closed-form 2x2 spin algebra.

Matrices are plain ``numpy`` arrays of shape ``(2, 2)`` and dtype complex.
Exponentials of traceless Hermitian generators always use the analytic
Pauli form ``cos(theta/2) I - i sin(theta/2) n.sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)

# sigma_+ = |up><down| with sigma_z |up> = +|up>
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.conj().T

# ladder operators in the sigma_x eigenbasis: vs_+ + h.c. = sigma_z, i vs_+ + h.c. = sigma_y
VARSIGMA_PLUS = 0.5 * (SIGMA_Z - 1j * SIGMA_Y)
VARSIGMA_MINUS = VARSIGMA_PLUS.conj().T

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)

AXIS_TOL = 1e-9
UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class AxisAngle:
    """Rotation by ``angle`` (radians) about the unit vector ``axis``."""

    axis: tuple[float, float, float]
    angle: float

    def __post_init__(self):
        n = np.asarray(self.axis, dtype=float)
        if n.shape != (3,):
            raise ValueError(f"axis must have three components, got {self.axis!r}")
        norm = float(np.linalg.norm(n))
        if abs(norm - 1.0) > AXIS_TOL:
            raise ValueError(f"axis is not normalized (|n| = {norm:.12g})")
        object.__setattr__(self, "axis", tuple(float(v) for v in n / norm))
        object.__setattr__(self, "angle", float(self.angle))

    @classmethod
    def from_vector(cls, vector, angle: float) -> "AxisAngle":
        """Normalize ``vector`` first; a zero vector falls back to the z axis."""
        v = np.asarray(vector, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return cls((0.0, 0.0, 1.0), angle)
        return cls(tuple(v / norm), angle)


def pauli_vector(n) -> np.ndarray:
    """Return ``n_x sigma_x + n_y sigma_y + n_z sigma_z``."""
    return n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z


def pauli_exp(a: AxisAngle) -> np.ndarray:
    """exp(-i (theta/2) n.sigma) in closed form."""
    half = 0.5 * a.angle
    return np.cos(half) * IDENTITY - 1j * np.sin(half) * pauli_vector(a.axis)


def rotation(axis, angle: float) -> np.ndarray:
    """Shorthand for ``pauli_exp(AxisAngle(axis, angle))``."""
    return pauli_exp(AxisAngle(tuple(axis), angle))


def generator_exp(h, t: float) -> np.ndarray:
    """exp(-i t h.sigma) for a real field vector ``h`` (any length, zero allowed)."""
    h = np.asarray(h, dtype=float)
    norm = float(np.linalg.norm(h))
    if norm == 0.0:
        return IDENTITY.copy()
    return pauli_exp(AxisAngle(tuple(h / norm), 2.0 * norm * t))


def pauli_exp_batch(h: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorized exp(-i t h.sigma).

    ``h`` has shape ``(..., 3)`` and ``t`` broadcasts against ``h[..., 0]``.
    Returns an array of shape ``(..., 2, 2)``.
    """
    h = np.asarray(h, dtype=float)
    t = np.asarray(t, dtype=float)
    norm = np.linalg.norm(h, axis=-1)
    phase = norm * t
    c = np.cos(phase)
    # sin(|h| t)/|h| is regular at |h| = 0
    s_over = np.where(norm > 0, np.sin(phase) / np.where(norm > 0, norm, 1.0), t)
    hx, hy, hz = h[..., 0], h[..., 1], h[..., 2]
    out = np.empty(np.broadcast(c, hx).shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c - 1j * s_over * hz
    out[..., 1, 1] = c + 1j * s_over * hz
    out[..., 0, 1] = -1j * s_over * (hx - 1j * hy)
    out[..., 1, 0] = -1j * s_over * (hx + 1j * hy)
    return out


def dagger(u: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(u, -1, -2))


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(dagger(u) @ u - IDENTITY)) <= tol)


def _require_unitary(u, name: str, tol: float = 1e-9):
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError(f"{name} must be a 2x2 matrix, got shape {u.shape}")
    if not is_unitary(u, tol):
        raise ValueError(f"{name} is not unitary")
    return u


def unitary_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """|tr(U^dagger V)| / 2, insensitive to global phase."""
    u = _require_unitary(u, "u")
    v = _require_unitary(v, "v")
    # elementwise conj(u) * v is the exact conjugate of conj(v) * u, so swapping arguments is bit-identical
    value = abs(np.sum(np.conj(u) * v))
    return min(1.0, float(value) / 2.0)


def state_fidelity(psi, phi, tol: float = 1e-10) -> float:
    """|<psi|phi>|^2 for normalized state vectors."""
    psi = np.asarray(psi, dtype=complex).ravel()
    phi = np.asarray(phi, dtype=complex).ravel()
    if psi.shape != phi.shape:
        raise ValueError("states have different dimensions")
    for name, vec in (("psi", psi), ("phi", phi)):
        if abs(np.vdot(vec, vec).real - 1.0) > tol:
            raise ValueError(f"{name} is not normalized")
    return min(1.0, float(abs(np.vdot(psi, phi)) ** 2))


def rotation_angle_axis(u: np.ndarray, reference=None) -> tuple[float, np.ndarray]:
    """Extract ``(theta, n)`` with ``u ~ exp(-i theta/2 n.sigma)`` up to global phase.

    The determinant phase is removed first, then ``theta`` comes from
    ``2 arccos(|tr u| / 2)`` so it lies in ``[0, pi]``. The axis is read off the
    traceless anti-Hermitian part. Near ``theta = pi`` the sign of the axis is
    not defined by ``u`` alone; pass ``reference`` (a previous axis) to pick the
    branch continuously.
    """
    u = np.asarray(u, dtype=complex)
    det = np.linalg.det(u)
    su = u / np.sqrt(det)
    tr = np.trace(su)
    if tr.real < 0:
        su = -su
        tr = -tr
    cos_half = min(1.0, abs(tr) / 2.0)
    theta = 2.0 * float(np.arccos(cos_half))
    # su = cos I - i sin n.sigma  ->  tr(su sigma_k) = -2i sin n_k
    v = np.array([(1j * np.trace(su @ p)).real / 2.0 for p in PAULI])
    norm = np.linalg.norm(v)
    n = v / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
    if reference is not None and np.dot(n, reference) < 0 and theta > np.pi / 2:
        # same element of SO(3) viewed from the other side of theta = pi
        n = -n
        theta = 2.0 * np.pi - theta
    return theta, n
