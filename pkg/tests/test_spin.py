import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from spinfilt.spin import (
    IDENTITY,
    PAULI,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    VARSIGMA_PLUS,
    AxisAngle,
    generator_exp,
    is_unitary,
    pauli_exp,
    pauli_exp_batch,
    rotation,
    rotation_angle_axis,
    state_fidelity,
    unitary_fidelity,
)

unit_vectors = (
    st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3)
    .map(np.array)
    .filter(lambda v: np.linalg.norm(v) > 0.1)
    .map(lambda v: v / np.linalg.norm(v))
)
angles = st.floats(-20, 20, allow_nan=False)


def expm_oracle(n, theta):
    return expm(-0.5j * theta * sum(c * p for c, p in zip(n, PAULI)))


@given(unit_vectors, angles)
def test_pauli_exp_matches_matrix_exponential(n, theta):
    assert np.allclose(pauli_exp(AxisAngle(tuple(n), theta)), expm_oracle(n, theta), atol=1e-12)


@given(unit_vectors, angles)
def test_rotation_is_unitary(n, theta):
    assert is_unitary(rotation(n, theta), 1e-12)


def test_pauli_exp_examples():
    assert np.allclose(rotation((0, 0, 1), math.pi), -1j * SIGMA_Z)
    assert np.allclose(rotation((1, 0, 0), 0.0), IDENTITY)
    assert np.allclose(rotation((0, 1, 0), 2 * math.pi), -IDENTITY)


def test_axis_must_be_normalized():
    with pytest.raises(ValueError):
        AxisAngle((1.0, 1.0, 0.0), 0.1)
    with pytest.raises(ValueError):
        AxisAngle((1.0, 0.0), 0.1)
    a = AxisAngle.from_vector((3.0, 4.0, 0.0), 0.2)
    assert a.axis == pytest.approx((0.6, 0.8, 0.0))


def test_generator_exp_zero_field_and_scaling():
    assert np.allclose(generator_exp((0, 0, 0), 3.0), IDENTITY)
    h = np.array([0.3, -0.2, 0.5])
    assert np.allclose(generator_exp(h, 1.7), expm(-1.7j * (h[0] * SIGMA_X + h[1] * SIGMA_Y + h[2] * SIGMA_Z)))


def test_batch_matches_scalar(rng):
    h = rng.normal(size=(5, 4, 3))
    h[0, 0] = 0.0
    t = rng.uniform(0, 3, size=(5, 4))
    out = pauli_exp_batch(h, t)
    for i in range(5):
        for j in range(4):
            assert np.allclose(out[i, j], generator_exp(h[i, j], t[i, j]), atol=1e-13)


def test_varsigma_ladder_identities():
    assert np.allclose(VARSIGMA_PLUS + VARSIGMA_PLUS.conj().T, SIGMA_Z)
    assert np.allclose(1j * VARSIGMA_PLUS + (1j * VARSIGMA_PLUS).conj().T, SIGMA_Y)


@given(unit_vectors, st.floats(0.01, math.pi - 0.01), st.floats(0, 2 * math.pi))
def test_angle_axis_round_trip(n, theta, phase):
    th, ax = rotation_angle_axis(np.exp(1j * phase) * rotation(n, theta))
    assert th == pytest.approx(theta, abs=1e-8)
    assert np.allclose(ax, n, atol=1e-7)


def test_angle_axis_reference_continues_past_pi():
    n = np.array([0.0, 0.0, 1.0])
    th, ax = rotation_angle_axis(rotation(n, 1.5 * math.pi), reference=n)
    assert th == pytest.approx(1.5 * math.pi)
    assert np.allclose(ax, n)
    th, ax = rotation_angle_axis(rotation(n, 1.5 * math.pi))
    assert th == pytest.approx(0.5 * math.pi)
    assert np.allclose(ax, -n)


@given(unit_vectors, angles, unit_vectors, angles)
def test_unitary_fidelity_symmetric_and_bounded(n1, t1, n2, t2):
    u, v = rotation(n1, t1), rotation(n2, t2)
    f = unitary_fidelity(u, v)
    assert f == unitary_fidelity(v, u)
    assert 0.0 <= f <= 1.0


def test_unitary_fidelity_values():
    u = rotation((1, 0, 0), 0.7)
    assert unitary_fidelity(u, np.exp(0.4j) * u) == pytest.approx(1.0)
    # |cos(theta/2)| between identity and a theta rotation
    assert unitary_fidelity(IDENTITY, rotation((0, 1, 0), 1.0)) == pytest.approx(math.cos(0.5))
    with pytest.raises(ValueError):
        unitary_fidelity(2 * IDENTITY, IDENTITY)


def test_state_fidelity():
    up = np.array([1, 0])
    plus = np.array([1, 1]) / math.sqrt(2)
    assert state_fidelity(up, plus) == pytest.approx(0.5)
    assert state_fidelity(up, 1j * up) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        state_fidelity(up, np.array([1, 1]))
    with pytest.raises(ValueError):
        state_fidelity(up, np.array([1, 0, 0]))
