import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from varint_dyn import liegroup as lg
from varint_dyn.errors import DomainError
from varint_dyn.liegroup import CoTwist, RetractionKind, Transform, Twist

from oracles import cay, cay_inverse, expm_twist

KINDS = list(RetractionKind)

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)
vec6 = arrays(np.float64, 6, elements=finite)
vec3 = arrays(np.float64, 3, elements=finite)


def small_angle(v, limit=3.0):
    # scale the angular block into a ball of the given radius
    v = np.array(v, dtype=float)
    th = np.linalg.norm(v[:3])
    if th > limit:
        v[:3] *= limit / th
    return v


@st.composite
def transforms(draw):
    w = small_angle(draw(vec3), 3.0)
    p = draw(vec3)
    return lg.retract(Twist(w, p))


# ---------------------------------------------------------------------------
# transforms

def test_compose_identity(rng):
    T = lg.retract(Twist(rng.normal(size=3), rng.normal(size=3)))
    assert lg.compose(Transform.identity(), T).allclose(T)
    assert lg.compose(T, Transform.identity()).allclose(T)


@given(transforms())
def test_compose_with_inverse_is_identity(T):
    assert lg.compose(T, lg.inverse(T)).allclose(Transform.identity(), atol=1e-12)
    assert lg.compose(lg.inverse(T), T).allclose(Transform.identity(), atol=1e-12)


def test_quarter_turns_compose_to_half_turn():
    T = lg.compose(lg.rot_z(math.pi / 2), lg.rot_z(math.pi / 2))
    expected = np.diag([-1.0, -1.0, 1.0])
    assert np.allclose(T.rotation, expected, atol=1e-15)


def test_long_composition_stays_orthonormal(rng):
    step = lg.retract(Twist(rng.normal(size=3) * 0.3, rng.normal(size=3)))
    T = Transform.identity()
    for _ in range(20_000):
        T = T @ step
    R = T.rotation
    assert np.abs(R.T @ R - np.eye(3)).max() < 1e-9
    assert abs(np.linalg.det(R) - 1.0) < 1e-9


def test_drifted_rotation_is_renormalised():
    R = lg.rot_z(0.3).rotation * (1 + 1e-6)
    T = lg.compose(Transform(R, np.zeros(3)), Transform.identity())
    assert np.abs(T.rotation.T @ T.rotation - np.eye(3)).max() < 1e-12


def test_twist_rejects_non_finite():
    with pytest.raises(ValueError):
        Twist([np.nan, 0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        CoTwist([0, 0, 0], [np.inf, 0, 0])


@given(vec6, vec6, st.floats(-10, 10, allow_nan=False))
def test_pairing_is_bilinear(f, v, a):
    F, V = CoTwist.from_vector(f), Twist.from_vector(v)
    assert lg.pairing(F * a, V) == pytest.approx(a * lg.pairing(F, V), abs=1e-12 * (1 + abs(a)) * 100)


# ---------------------------------------------------------------------------
# retractions

@pytest.mark.parametrize("kind", KINDS)
def test_retract_zero_is_identity(kind):
    T = lg.retract(Twist.zero(), kind)
    assert np.array_equal(T.matrix(), np.eye(4))


def test_pure_translation():
    T = lg.retract(Twist([0, 0, 0], [1, 0, 0]))
    assert np.array_equal(T.rotation, np.eye(3))
    assert np.allclose(T.translation, [1, 0, 0], atol=0)


def test_quarter_turn_about_z():
    T = lg.retract(Twist([0, 0, math.pi / 2], [0, 0, 0]))
    assert np.allclose(T.rotation, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


@given(vec6)
def test_exponential_matches_matrix_exponential(v):
    v = small_angle(v)
    assert np.allclose(lg.retract(Twist.from_vector(v)).matrix(), expm_twist(v), atol=1e-11)


@given(vec6)
def test_cayley_matches_dense_formula(v):
    T = lg.retract(Twist.from_vector(v), RetractionKind.CAYLEY).matrix()
    assert np.allclose(T, cay(v), atol=1e-10)
    assert np.allclose(lg.retract_inverse(Transform.from_matrix(T), "cayley").vector,
                       cay_inverse(T), atol=1e-8 * (1 + np.abs(v).max()))


@pytest.mark.parametrize("kind", KINDS)
def test_round_trip_thousand_samples(kind, rng):
    worst = 0.0
    for _ in range(1000):
        v = rng.normal(size=6)
        v[:3] *= rng.uniform(0, 3) / max(np.linalg.norm(v[:3]), 1e-300)
        back = lg.retract_inverse(lg.retract(Twist.from_vector(v), kind), kind).vector
        worst = max(worst, np.linalg.norm(back - v) / (1 + np.linalg.norm(v)))
    assert worst <= 1e-9


@given(transforms())
def test_retract_of_retract_inverse(T):
    for kind in KINDS:
        back = lg.retract(lg.retract_inverse(T, kind), kind)
        assert np.allclose(back.matrix(), T.matrix(), atol=1e-10)


def test_log_near_half_turn():
    th = math.pi - 1e-3
    v = lg.retract_inverse(lg.rot_z(th))
    assert np.allclose(v.vector, [0, 0, th, 0, 0, 0], atol=1e-9)


def test_log_of_half_turn_is_domain_error():
    with pytest.raises(DomainError):
        lg.retract_inverse(lg.rot_x(math.pi))
    with pytest.raises(DomainError):
        lg.retract_inverse(lg.rot_x(math.pi), RetractionKind.CAYLEY)


@pytest.mark.parametrize("scale", [1e-2, 5e-3, 2.5e-3])
def test_retractions_agree_to_third_order(scale, rng):
    worst = 0.0
    for _ in range(50):
        v = rng.normal(size=6)
        v *= scale / np.linalg.norm(v)
        d = (lg.retract(Twist.from_vector(v)).matrix()
             - lg.retract(Twist.from_vector(v), RetractionKind.CAYLEY).matrix())
        worst = max(worst, np.abs(d).max() / scale ** 3)
    # exp and Cayley differ by X^3/12 + O(X^4)
    assert worst < 0.2


# ---------------------------------------------------------------------------
# trivialised tangents

@pytest.mark.parametrize("kind", KINDS)
def test_dtau_at_zero_is_identity(kind, rng):
    w = Twist.from_vector(rng.normal(size=6))
    assert np.array_equal(lg.dtau_inv(Twist.zero(), w, kind).vector, w.vector)
    f = CoTwist.from_vector(rng.normal(size=6))
    assert np.array_equal(lg.dtau_inv_dual(Twist.zero(), f, kind).vector, f.vector)


@given(vec6, vec6)
@settings(max_examples=200)
def test_dtau_inv_inverts_dtau(v, w):
    v = small_angle(v, 6.0)
    V, W = Twist.from_vector(v), Twist.from_vector(w)
    for kind in KINDS:
        back = lg.dtau_inv(V, lg.dtau(V, W, kind), kind).vector
        assert np.allclose(back, w, atol=1e-9 * (1 + np.abs(w).max()))
        P = lg.dtau_inv_matrix(V, kind) @ lg.dtau_matrix(V, kind)
        assert np.abs(P - np.eye(6)).max() < 1e-9


@pytest.mark.parametrize("kind", KINDS)
def test_dtau_matches_finite_differences(kind, rng):
    ret = expm_twist if kind is RetractionKind.EXPONENTIAL else cay
    h = 1e-5
    for _ in range(20):
        v = rng.normal(size=6)
        w = rng.normal(size=6)
        Tinv = np.linalg.inv(ret(v))
        dT = (ret(v + h * w) - ret(v - h * w)) / (2 * h) @ Tinv
        fd = np.array([dT[2, 1], dT[0, 2], dT[1, 0], *dT[:3, 3]])
        exact = lg.dtau(Twist.from_vector(v), Twist.from_vector(w), kind).vector
        assert np.linalg.norm(fd - exact) <= 1e-6 * np.linalg.norm(exact)


@pytest.mark.parametrize("theta", [1e-9, 1e-5, 1e-4, 0.5, 0.999, 1.001, 2.0, 6.0])
def test_dtau_inv_continuous_across_series_switch(theta, rng):
    # compare against the inverse of dtau built by finite-difference-free series
    axis = rng.normal(size=3)
    v = np.concatenate([theta * axis / np.linalg.norm(axis), rng.normal(size=3)])
    V = Twist.from_vector(v)
    P = lg.dtau_inv_matrix(V) @ lg.dtau_matrix(V)
    assert np.abs(P - np.eye(6)).max() < 1e-11


def test_dtau_inv_outside_domain():
    with pytest.raises(DomainError):
        lg.dtau_inv(Twist([2 * math.pi, 0, 0], [0, 0, 0]), Twist.zero())


def test_dtau_inv_dual_is_transpose():
    rng = np.random.default_rng(3)
    for kind in KINDS:
        V = Twist.from_vector(rng.normal(size=6))
        cols = np.column_stack([lg.dtau_inv(V, Twist.from_vector(e), kind).vector
                                for e in np.eye(6)])
        rows = np.column_stack([lg.dtau_inv_dual(V, CoTwist.from_vector(e), kind).vector
                                for e in np.eye(6)])
        assert np.allclose(rows, cols.T, atol=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_dtau_inv_dual_pairing(kind, rng):
    for _ in range(100):
        V = Twist.from_vector(rng.normal(size=6))
        F = CoTwist.from_vector(rng.normal(size=6))
        W = Twist.from_vector(rng.normal(size=6))
        lhs = lg.pairing(lg.dtau_inv_dual(V, F, kind), W)
        rhs = lg.pairing(F, lg.dtau_inv(V, W, kind))
        assert abs(lhs - rhs) < 1e-11


@pytest.mark.parametrize("kind", KINDS)
def test_dtau_inv_directional_derivative(kind, rng):
    h = 1e-6
    for _ in range(10):
        v, w = rng.normal(size=6), rng.normal(size=6)
        V, W = Twist.from_vector(v), Twist.from_vector(w)
        fd = (lg.dtau_inv_matrix(Twist.from_vector(v + h * w), kind)
              - lg.dtau_inv_matrix(Twist.from_vector(v - h * w), kind)) / (2 * h)
        exact = lg.dtau_inv_directional(V, W, kind)
        assert np.abs(fd - exact).max() <= 1e-7 * (1 + np.abs(exact).max())


# ---------------------------------------------------------------------------
# adjoint actions

def test_adjoint_identity(rng):
    v = Twist.from_vector(rng.normal(size=6))
    assert np.array_equal(lg.Ad(Transform.identity(), v).vector, v.vector)


@given(transforms(), transforms(), vec6, vec6)
def test_adjoint_is_action_and_dual(A, B, v, f):
    V, F = Twist.from_vector(v), CoTwist.from_vector(f)
    lhs = lg.Ad(A @ B, V).vector
    rhs = lg.Ad(A, lg.Ad(B, V)).vector
    assert np.abs(lhs - rhs).max() < 1e-11 * (1 + np.abs(lhs).max())
    back = lg.Ad(A, lg.Ad(lg.inverse(A), V)).vector
    assert np.abs(back - v).max() < 1e-11 * (1 + np.abs(lhs).max())
    p1 = lg.pairing(lg.Ad_dual(A, F), V)
    p2 = lg.pairing(F, lg.Ad(A, V))
    assert abs(p1 - p2) < 1e-11 * (1 + abs(p1))


def test_adjoint_matches_matrix_conjugation(rng):
    from oracles import twist_hat, twist_vee
    for _ in range(20):
        T = lg.retract(Twist.from_vector(rng.normal(size=6)))
        v = rng.normal(size=6)
        M = T.matrix()
        expected = twist_vee(M @ twist_hat(v) @ np.linalg.inv(M))
        assert np.allclose(lg.Ad(T, Twist.from_vector(v)).vector, expected, atol=1e-12)


def test_retraction_kind_parse():
    assert RetractionKind.parse("exp") is RetractionKind.EXPONENTIAL
    assert RetractionKind.parse("Cayley") is RetractionKind.CAYLEY
    with pytest.raises(ValueError):
        RetractionKind.parse("quaternion")
