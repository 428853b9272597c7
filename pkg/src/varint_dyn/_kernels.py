"""Compiled array kernels.

Everything here works on raw ``float64`` arrays so that numba can compile it:
transforms are 4x4 homogeneous matrices, twists and co-twists are length-6
vectors ordered ``(angular, linear)``. The public modules wrap these with
typed objects.

Tree layout used by all recursive kernels (``n`` bodies, topologically
sorted so ``parent[i] < i``):

    parent  int64[n]       parent index, -1 for the inertial frame
    offset  float64[n,4,4] fixed parent-to-joint transform M_i
    screw   float64[n,6]   joint screw S_i expressed in the child frame
    inertia float64[n,6,6] spatial inertia G_i in the body frame
    mass    float64[n]
    com     float64[n,3]   centre of mass in the body frame

``ops`` is a length-1 int64 counter incremented once per primitive spatial
operation (retraction, adjoint application, 6x6 product). It exists so that
complexity claims can be checked without wall clocks.
"""

import math

import numpy as np
from numba import njit

from .errors import DomainError, SingularJointError

EXP = 0
CAYLEY = 1

# angle guard for inverse retractions; beyond this the map is not injective
LOG_ANGLE_LIMIT = math.pi - 1e-6
# convergence radius of the dexp-inverse series is 2*pi
DEXPINV_ANGLE_LIMIT = 2.0 * math.pi - 1e-6
# below this angle the tangent coefficients come from their Taylor series
SERIES_SWITCH = 1.0
PIVOT_TOL = 1e-12

# Taylor coefficients in s = theta**2, s**0 .. s**7
_A_SER = np.array([1 / 12, 0.0, -1 / 30240, -1 / 604800, -1 / 15966720,
                   -691 / 326918592000, -1 / 14944849920,
                   -3617 / 1778437140480000])
_B_SER = np.array([-1 / 720, -1 / 15120, -1 / 403200, -1 / 11975040,
                   -691 / 261534873600, -1 / 12454041600,
                   -3617 / 1524374691840000, -43867 / 638636777146368000])
_DB_SER = np.array([-1 / 15120, -1 / 201600, -1 / 3991680, -691 / 65383718400,
                    -1 / 2490808320, -3617 / 254062448640000,
                    -43867 / 91233825306624000,
                    -174611 / 11150800870809600000])
_A1_SER = np.array([1 / 6, 0.0, -1 / 5040, 1 / 181440, -1 / 13305600,
                    1 / 1556755200, -1 / 261534873600, 1 / 59281238016000])
_B1_SER = np.array([1 / 120, -1 / 2520, 1 / 120960, -1 / 9979200,
                    1 / 1245404160, -1 / 217945728000, 1 / 50812489728000,
                    -1 / 15205637551104000])
_C_SER = np.array([1 / 24, 0.0, -1 / 40320, 1 / 1814400, -1 / 159667200,
                   1 / 21794572800, -1 / 4184557977600, 1 / 1067062284288000])
_D_SER = np.array([1 / 720, -1 / 20160, 1 / 1209600, -1 / 119750400,
                   1 / 17435658240, -1 / 3487131648000, 1 / 914624815104000,
                   -1 / 304112751022080000])


@njit(cache=True)
def _horner(coeffs, s):
    acc = 0.0
    for k in range(coeffs.shape[0] - 1, -1, -1):
        acc = acc * s + coeffs[k]
    return acc


# ---------------------------------------------------------------------------
# small-matrix algebra


@njit(cache=True)
def hat(w):
    out = np.zeros((3, 3))
    out[0, 1] = -w[2]
    out[0, 2] = w[1]
    out[1, 0] = w[2]
    out[1, 2] = -w[0]
    out[2, 0] = -w[1]
    out[2, 1] = w[0]
    return out


@njit(cache=True)
def ad(x):
    """Matrix of the Lie bracket ``[x, .]`` on se(3)."""
    out = np.zeros((6, 6))
    W = hat(x[:3])
    out[:3, :3] = W
    out[3:, 3:] = W
    out[3:, :3] = hat(x[3:])
    return out


@njit(cache=True)
def coad(y, m):
    """``ad(y).T @ m`` without forming the matrix."""
    w0, w1, w2, v0, v1, v2 = y[0], y[1], y[2], y[3], y[4], y[5]
    a0, a1, a2, l0, l1, l2 = m[0], m[1], m[2], m[3], m[4], m[5]
    out = np.empty(6)
    # (m_ang x w + m_lin x v, m_lin x w)
    out[0] = a1 * w2 - a2 * w1 + l1 * v2 - l2 * v1
    out[1] = a2 * w0 - a0 * w2 + l2 * v0 - l0 * v2
    out[2] = a0 * w1 - a1 * w0 + l0 * v1 - l1 * v0
    out[3] = l1 * w2 - l2 * w1
    out[4] = l2 * w0 - l0 * w2
    out[5] = l0 * w1 - l1 * w0
    return out


@njit(cache=True)
def coad_into(y, m, out):
    w0, w1, w2, v0, v1, v2 = y[0], y[1], y[2], y[3], y[4], y[5]
    a0, a1, a2, l0, l1, l2 = m[0], m[1], m[2], m[3], m[4], m[5]
    # (m_ang x w + m_lin x v, m_lin x w)
    out[0] = a1 * w2 - a2 * w1 + l1 * v2 - l2 * v1
    out[1] = a2 * w0 - a0 * w2 + l2 * v0 - l0 * v2
    out[2] = a0 * w1 - a1 * w0 + l0 * v1 - l1 * v0
    out[3] = l1 * w2 - l2 * w1
    out[4] = l2 * w0 - l0 * w2
    out[5] = l0 * w1 - l1 * w0


@njit(cache=True)
def bracket(x, y):
    """Lie bracket ``ad(x) @ y``."""
    out = np.empty(6)
    bracket_into(x, y, out)
    return out


@njit(cache=True)
def bracket_into(x, y, out):
    w0, w1, w2, v0, v1, v2 = x[0], x[1], x[2], x[3], x[4], x[5]
    a0, a1, a2, b0, b1, b2 = y[0], y[1], y[2], y[3], y[4], y[5]
    out[0] = w1 * a2 - w2 * a1
    out[1] = w2 * a0 - w0 * a2
    out[2] = w0 * a1 - w1 * a0
    out[3] = w1 * b2 - w2 * b1 + v1 * a2 - v2 * a1
    out[4] = w2 * b0 - w0 * b2 + v2 * a0 - v0 * a2
    out[5] = w0 * b1 - w1 * b0 + v0 * a1 - v1 * a0


@njit(cache=True)
def adjoint(T):
    out = np.zeros((6, 6))
    R = T[:3, :3]
    out[:3, :3] = R
    out[3:, 3:] = R
    out[3:, :3] = mm(hat(T[:3, 3]), R)
    return out


@njit(cache=True)
def twist_matrix(x):
    out = np.zeros((4, 4))
    out[:3, :3] = hat(x[:3])
    out[:3, 3] = x[3:]
    return out


@njit(cache=True)
def twist_vector(X):
    out = np.empty(6)
    out[0] = X[2, 1]
    out[1] = X[0, 2]
    out[2] = X[1, 0]
    out[3:] = X[:3, 3]
    return out


# ---------------------------------------------------------------------------
# retractions


@njit(cache=True)
def _so3_coeffs(th):
    # sin(t)/t, (1 - cos t)/t^2, (t - sin t)/t^3
    if th < 1e-4:
        s = th * th
        return 1.0 - s / 6.0, 0.5 - s / 24.0, 1.0 / 6.0 - s / 120.0
    st = math.sin(th)
    return st / th, (1.0 - math.cos(th)) / (th * th), (th - st) / (th ** 3)


@njit(cache=True)
def exp_se3(x):
    T = np.empty((4, 4))
    exp_se3_into(x, 1.0, T)
    return T


@njit(cache=True)
def exp_se3_into(x, scale, T):
    """``T = exp(scale * x)``."""
    w0, w1, w2 = scale * x[0], scale * x[1], scale * x[2]
    t2 = w0 * w0 + w1 * w1 + w2 * w2
    A, B, C = _so3_coeffs(math.sqrt(t2))
    # R = I + A hat(w) + B (w w^T - t2 I), and the left Jacobian likewise with B, C
    T[0, 0] = 1.0 + B * (w0 * w0 - t2)
    T[1, 1] = 1.0 + B * (w1 * w1 - t2)
    T[2, 2] = 1.0 + B * (w2 * w2 - t2)
    T[0, 1] = -A * w2 + B * w0 * w1
    T[1, 0] = A * w2 + B * w0 * w1
    T[0, 2] = A * w1 + B * w0 * w2
    T[2, 0] = -A * w1 + B * w0 * w2
    T[1, 2] = -A * w0 + B * w1 * w2
    T[2, 1] = A * w0 + B * w1 * w2
    v0, v1, v2 = scale * x[3], scale * x[4], scale * x[5]
    wv = w0 * v0 + w1 * v1 + w2 * v2
    # J v = v + B (w x v) + C (w (w.v) - t2 v)
    T[0, 3] = v0 + B * (w1 * v2 - w2 * v1) + C * (w0 * wv - t2 * v0)
    T[1, 3] = v1 + B * (w2 * v0 - w0 * v2) + C * (w1 * wv - t2 * v1)
    T[2, 3] = v2 + B * (w0 * v1 - w1 * v0) + C * (w2 * wv - t2 * v2)
    T[3, 0] = 0.0
    T[3, 1] = 0.0
    T[3, 2] = 0.0
    T[3, 3] = 1.0


@njit(cache=True)
def _rotation_angle(R):
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    sx = 0.5 * (R[2, 1] - R[1, 2])
    sy = 0.5 * (R[0, 2] - R[2, 0])
    sz = 0.5 * (R[1, 0] - R[0, 1])
    s = math.sqrt(sx * sx + sy * sy + sz * sz)
    return math.atan2(s, c), sx, sy, sz


@njit(cache=True)
def log_se3(T):
    th, sx, sy, sz = _rotation_angle(T[:3, :3])
    if th >= LOG_ANGLE_LIMIT:
        raise DomainError("rotation angle too close to pi for the exponential map")
    if th < 1e-4:
        s = th * th
        k = 1.0 + s / 6.0 + 7.0 * s * s / 360.0
        D = 1.0 / 12.0 + s / 720.0 + s * s / 30240.0
    else:
        k = th / math.sin(th)
        D = 1.0 / (th * th) - (1.0 + math.cos(th)) / (2.0 * th * math.sin(th))
    w0, w1, w2 = k * sx, k * sy, k * sz
    p0, p1, p2 = T[0, 3], T[1, 3], T[2, 3]
    wp = w0 * p0 + w1 * p1 + w2 * p2
    t2 = th * th
    out = np.empty(6)
    out[0] = w0
    out[1] = w1
    out[2] = w2
    # J^-1 p = p - (w x p) / 2 + D (w (w.p) - t2 p)
    out[3] = p0 - 0.5 * (w1 * p2 - w2 * p1) + D * (w0 * wp - t2 * p0)
    out[4] = p1 - 0.5 * (w2 * p0 - w0 * p2) + D * (w1 * wp - t2 * p1)
    out[5] = p2 - 0.5 * (w0 * p1 - w1 * p0) + D * (w2 * wp - t2 * p2)
    return out


@njit(cache=True)
def cay_se3(x):
    w = x[:3]
    th2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    W = hat(w)
    W2 = np.outer(w, w) - th2 * np.eye(3)
    T = np.eye(4)
    T[:3, :3] += (4.0 / (4.0 + th2)) * (W + 0.5 * W2)
    Kinv = np.eye(3) + (2.0 * W + W2) / (4.0 + th2)
    T[:3, 3] = mv(Kinv, x[3:])
    return T


@njit(cache=True)
def cayinv_se3(T):
    R = T[:3, :3]
    th, sx, sy, sz = _rotation_angle(R)
    if th >= LOG_ANGLE_LIMIT:
        raise DomainError("rotation angle too close to pi for the Cayley map")
    k = 4.0 / (1.0 + R[0, 0] + R[1, 1] + R[2, 2])
    out = np.empty(6)
    out[0] = k * sx
    out[1] = k * sy
    out[2] = k * sz
    out[3:] = mv(np.eye(3) - 0.5 * hat(out[:3]), T[:3, 3])
    return out


@njit(cache=True)
def retract(x, kind):
    if kind == EXP:
        return exp_se3(x)
    return cay_se3(x)


@njit(cache=True)
def retract_inv(T, kind):
    if kind == EXP:
        return log_se3(T)
    return cayinv_se3(T)


# ---------------------------------------------------------------------------
# right-trivialised tangents


@njit(cache=True)
def _dexpinv_coeffs(th):
    # dexp^-1 = I - ad/2 + a ad^2 + b ad^4 ; returns (a, b, db/ds), da/ds = s*db/ds
    if th < SERIES_SWITCH:
        s = th * th
        return _horner(_A_SER, s), _horner(_B_SER, s), _horner(_DB_SER, s)
    h = 0.5 * th
    sh = math.sin(h)
    ch = math.cos(h)
    cot = ch / sh
    t2 = th * th
    E0 = h * cot - 1.0
    E1 = 1.0 / (4.0 * sh * sh) - cot / (2.0 * th)
    b = -(E0 + 0.5 * t2 * E1) / (t2 * t2)
    a = 0.5 * E1 + 2.0 * t2 * b
    db = (th ** 3 * ch / sh ** 3 + 3.0 * t2 / (sh * sh) + 6.0 * th * cot
          - 32.0) / (16.0 * t2 ** 3)
    return a, b, db


@njit(cache=True)
def _dexp_coeffs(th):
    # dexp = I + ad/2 + a1 ad^2 + c ad^3 + b1 ad^4 + d ad^5
    if th < SERIES_SWITCH:
        s = th * th
        return (_horner(_A1_SER, s), _horner(_C_SER, s), _horner(_B1_SER, s),
                _horner(_D_SER, s))
    st = math.sin(th)
    ct = math.cos(th)
    a1 = (th * ct + 4.0 * th - 5.0 * st) / (2.0 * th ** 3)
    b1 = (th * ct + 2.0 * th - 3.0 * st) / (2.0 * th ** 5)
    c = (th * th + 0.5 * th * st + 3.0 * ct - 3.0) / th ** 4
    d = (th * th + th * st + 4.0 * ct - 4.0) / (2.0 * th ** 6)
    return a1, c, b1, d


@njit(cache=True)
def _angle(x):
    return math.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])


@njit(cache=True)
def dexpinv_matrix(x):
    th = _angle(x)
    if th >= DEXPINV_ANGLE_LIMIT:
        raise DomainError("twist outside the convergence domain of dexp^-1")
    a, b, _ = _dexpinv_coeffs(th)
    A = ad(x)
    A2 = mm(A, A)
    return np.eye(6) - 0.5 * A + a * A2 + b * mm(A2, A2)


@njit(cache=True)
def dexp_matrix(x):
    a1, c, b1, d = _dexp_coeffs(_angle(x))
    A = ad(x)
    A2 = mm(A, A)
    A3 = mm(A2, A)
    A4 = mm(A2, A2)
    return np.eye(6) + 0.5 * A + a1 * A2 + c * A3 + b1 * A4 + d * mm(A4, A)


@njit(cache=True)
def dcayinv_matrix(x):
    W = hat(x[:3])
    K = np.eye(3) - 0.5 * W
    out = np.zeros((6, 6))
    out[:3, :3] = K + 0.25 * np.outer(x[:3], x[:3])
    out[3:, 3:] = K
    out[3:, :3] = -0.5 * mm(K, hat(x[3:]))
    return out


@njit(cache=True)
def dcay_matrix(x):
    # dcay_x(y) = (I - x/2)^-1 y (I + x/2)^-1, column by column
    X = twist_matrix(x)
    L = np.linalg.inv(np.eye(4) - 0.5 * X)
    Rm = np.linalg.inv(np.eye(4) + 0.5 * X)
    out = np.empty((6, 6))
    e = np.zeros(6)
    for k in range(6):
        e[:] = 0.0
        e[k] = 1.0
        out[:, k] = twist_vector(mm(mm(L, twist_matrix(e)), Rm))
    return out


@njit(cache=True)
def dtau_inv_matrix(x, kind):
    if kind == EXP:
        return dexpinv_matrix(x)
    return dcayinv_matrix(x)


@njit(cache=True)
def dtau_matrix(x, kind):
    if kind == EXP:
        return dexp_matrix(x)
    return dcay_matrix(x)


@njit(cache=True)
def dexpinv_directional(x, y):
    """Derivative of the dexp^-1 matrix at ``x`` along ``y``."""
    th = _angle(x)
    if th >= DEXPINV_ANGLE_LIMIT:
        raise DomainError("twist outside the convergence domain of dexp^-1")
    a, b, db = _dexpinv_coeffs(th)
    ds = 2.0 * (x[0] * y[0] + x[1] * y[1] + x[2] * y[2])
    A = ad(x)
    Y = ad(y)
    A2 = mm(A, A)
    A3 = mm(A2, A)
    return (-0.5 * Y + (th * th * db * ds) * A2 + a * (mm(Y, A) + mm(A, Y))
            + (db * ds) * mm(A2, A2)
            + b * (mm(Y, A3) + mm(mm(A, Y), A2) + mm(mm(A2, Y), A) + mm(A3, Y)))


@njit(cache=True)
def dcayinv_directional(x, y):
    w = x[:3]
    v = x[3:]
    bw = y[:3]
    K = np.eye(3) - 0.5 * hat(w)
    Bh = hat(bw)
    out = np.zeros((6, 6))
    out[:3, :3] = -0.5 * Bh + 0.25 * (np.outer(bw, w) + np.outer(w, bw))
    out[3:, 3:] = -0.5 * Bh
    out[3:, :3] = 0.25 * mm(Bh, hat(v)) - 0.5 * mm(K, hat(y[3:]))
    return out


@njit(cache=True)
def dexpinv_directional_dual(x, y, m):
    """``dexpinv_directional(x, y).T @ m`` using only co-adjoint products."""
    th = _angle(x)
    if th >= DEXPINV_ANGLE_LIMIT:
        raise DomainError("twist outside the convergence domain of dexp^-1")
    a, b, db = _dexpinv_coeffs(th)
    ds = 2.0 * (x[0] * y[0] + x[1] * y[1] + x[2] * y[2])
    # u_k = (ad_x^T)^k m
    u1 = coad(x, m)
    u2 = coad(x, u1)
    u3 = coad(x, u2)
    u4 = coad(x, u3)
    w0 = coad(y, m)
    w1 = coad(y, u1)
    w2 = coad(y, u2)
    w3 = coad(y, u3)
    cubic = coad(x, coad(x, coad(x, w0))) + coad(x, coad(x, w1)) + coad(x, w2) + w3
    return (-0.5 * w0 + (th * th * db * ds) * u2 + a * (coad(x, w0) + w1)
            + (db * ds) * u4 + b * cubic)


@njit(cache=True)
def dexpinv_dual_apply(x, m):
    """``dexpinv_matrix(x).T @ m`` from co-adjoint products."""
    th = _angle(x)
    if th >= DEXPINV_ANGLE_LIMIT:
        raise DomainError("twist outside the convergence domain of dexp^-1")
    out = np.empty(6)
    _dexpinv_dual(x, m, th, out, np.empty((4, 6)))
    return out


@njit(cache=True)
def _dexpinv_dual(x, m, th, out, work):
    a, b, _ = _dexpinv_coeffs(th)
    coad_into(x, m, work[0])
    coad_into(x, work[0], work[1])
    coad_into(x, work[1], work[2])
    coad_into(x, work[2], work[3])
    for k in range(6):
        out[k] = m[k] - 0.5 * work[0, k] + a * work[1, k] + b * work[3, k]


@njit(cache=True)
def dtau_inv_dual_apply(x, m, kind):
    if kind == EXP:
        return dexpinv_dual_apply(x, m)
    return mtv(dcayinv_matrix(x), m)


@njit(cache=True)
def dtau_inv_directional_dual(x, y, m, kind):
    if kind == EXP:
        return dexpinv_directional_dual(x, y, m)
    return mtv(dcayinv_directional(x, y), m)


@njit(cache=True)
def dtau_inv_directional(x, y, kind):
    if kind == EXP:
        return dexpinv_directional(x, y)
    return dcayinv_directional(x, y)


# ---------------------------------------------------------------------------
# tree recursions
#
# Explicit loops below avoid BLAS dispatch on 6x6 operands and work on any
# memory layout.


@njit(cache=True)
def mv(M, v):
    r, c = M.shape
    out = np.zeros(r)
    for i in range(r):
        acc = 0.0
        for k in range(c):
            acc += M[i, k] * v[k]
        out[i] = acc
    return out


@njit(cache=True)
def mtv(M, v):
    r, c = M.shape
    out = np.zeros(c)
    for k in range(r):
        vk = v[k]
        for i in range(c):
            out[i] += M[k, i] * vk
    return out


@njit(cache=True)
def mm(A, B):
    r, m = A.shape
    c = B.shape[1]
    out = np.zeros((r, c))
    for i in range(r):
        for k in range(m):
            a = A[i, k]
            for j in range(c):
                out[i, j] += a * B[k, j]
    return out


@njit(cache=True)
def dot6(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        acc += a[k] * b[k]
    return acc


@njit(cache=True)
def rigid_mul(A, B, out):
    """``out = A B`` for rigid transforms, bottom row implied."""
    for i in range(3):
        a0, a1, a2 = A[i, 0], A[i, 1], A[i, 2]
        for j in range(3):
            out[i, j] = a0 * B[0, j] + a1 * B[1, j] + a2 * B[2, j]
        out[i, 3] = a0 * B[0, 3] + a1 * B[1, 3] + a2 * B[2, 3] + A[i, 3]
    out[3, 0] = 0.0
    out[3, 1] = 0.0
    out[3, 2] = 0.0
    out[3, 3] = 1.0


@njit(cache=True)
def rigid_inv_mul(A, B, out):
    """``out = A^-1 B`` for rigid transforms."""
    d0 = B[0, 3] - A[0, 3]
    d1 = B[1, 3] - A[1, 3]
    d2 = B[2, 3] - A[2, 3]
    for i in range(3):
        a0, a1, a2 = A[0, i], A[1, i], A[2, i]
        for j in range(3):
            out[i, j] = a0 * B[0, j] + a1 * B[1, j] + a2 * B[2, j]
        out[i, 3] = a0 * d0 + a1 * d1 + a2 * d2
    out[3, 0] = 0.0
    out[3, 1] = 0.0
    out[3, 2] = 0.0
    out[3, 3] = 1.0


@njit(cache=True)
def adjoint_inv_into(A, out):
    """``out = Ad(A^-1)``, the child-from-parent twist map of a joint transform."""
    for i in range(3):
        for j in range(3):
            out[i, j] = A[j, i]
            out[i + 3, j + 3] = A[j, i]
            out[i, j + 3] = 0.0
    t0, t1, t2 = A[0, 3], A[1, 3], A[2, 3]
    # lower-left block -R^T hat(t); its row i is t x (column i of R)
    for i in range(3):
        r0, r1, r2 = A[0, i], A[1, i], A[2, i]
        out[i + 3, 0] = t1 * r2 - t2 * r1
        out[i + 3, 1] = t2 * r0 - t0 * r2
        out[i + 3, 2] = t0 * r1 - t1 * r0


@njit(cache=True)
def wrench_to_parent(A, f, acc):
    """``acc += Ad(A^-1)^T f``: a child-frame wrench expressed in the parent frame."""
    l0 = A[0, 0] * f[3] + A[0, 1] * f[4] + A[0, 2] * f[5]
    l1 = A[1, 0] * f[3] + A[1, 1] * f[4] + A[1, 2] * f[5]
    l2 = A[2, 0] * f[3] + A[2, 1] * f[4] + A[2, 2] * f[5]
    t0, t1, t2 = A[0, 3], A[1, 3], A[2, 3]
    acc[0] += A[0, 0] * f[0] + A[0, 1] * f[1] + A[0, 2] * f[2] + t1 * l2 - t2 * l1
    acc[1] += A[1, 0] * f[0] + A[1, 1] * f[1] + A[1, 2] * f[2] + t2 * l0 - t0 * l2
    acc[2] += A[2, 0] * f[0] + A[2, 1] * f[1] + A[2, 2] * f[2] + t0 * l1 - t1 * l0
    acc[3] += l0
    acc[4] += l1
    acc[5] += l2


@njit(cache=True)
def wrench_by_adjoint(T, f, out):
    """``out = Ad(T)^T f``."""
    f0, f1, f2, l0, l1, l2 = f[0], f[1], f[2], f[3], f[4], f[5]
    t0, t1, t2 = T[0, 3], T[1, 3], T[2, 3]
    # angular part R^T (f_ang + f_lin x t), linear part R^T f_lin
    g0 = f0 + l1 * t2 - l2 * t1
    g1 = f1 + l2 * t0 - l0 * t2
    g2 = f2 + l0 * t1 - l1 * t0
    for i in range(3):
        out[i] = T[0, i] * g0 + T[1, i] * g1 + T[2, i] * g2
        out[i + 3] = T[0, i] * l0 + T[1, i] * l1 + T[2, i] * l2


@njit(cache=True)
def mv_into(M, v, out):
    """``out = M v`` for 6x6 ``M``; ``out`` must not alias ``v``."""
    for i in range(6):
        acc = 0.0
        for k in range(6):
            acc += M[i, k] * v[k]
        out[i] = acc


@njit(cache=True)
def mtv_add(M, v, acc):
    """``acc += M^T v`` for 6x6 ``M``."""
    for k in range(6):
        vk = v[k]
        for i in range(6):
            acc[i] += M[k, i] * vk


@njit(cache=True)
def joint_transforms(offset, screw, q):
    n = q.shape[0]
    out = np.empty((n, 4, 4))
    tmp = np.empty((4, 4))
    for i in range(n):
        exp_se3_into(screw[i], q[i], tmp)
        rigid_mul(offset[i], tmp, out[i])
    return out


@njit(cache=True)
def forward_kinematics(parent, offset, screw, q, ops):
    n = q.shape[0]
    A = joint_transforms(offset, screw, q)
    T = np.empty((n, 4, 4))
    for i in range(n):
        p = parent[i]
        if p < 0:
            T[i] = A[i]
        else:
            rigid_mul(T[p], A[i], T[i])
        ops[0] += 2
    return T


@njit(cache=True)
def displacements(parent, offset, screw, q_a, q_b, dt, kind, ops):
    """Per-body displacement and average velocity between two configurations.

    Returns the joint transforms at ``q_a``, the displacements and the body
    average velocities.
    """
    A = joint_transforms(offset, screw, q_a)
    dT, V = relative_motion(parent, A, joint_transforms(offset, screw, q_b), dt,
                            kind, ops)
    return A, dT, V


@njit(cache=True)
def relative_motion(parent, A, B, dt, kind, ops):
    """Displacements and average velocities from joint transforms at both ends."""
    n = A.shape[0]
    dT = np.empty((n, 4, 4))
    V = np.empty((n, 6))
    tmp = np.empty((4, 4))
    for i in range(n):
        p = parent[i]
        if p < 0:
            rigid_inv_mul(A[i], B[i], dT[i])
        else:
            rigid_mul(dT[p], B[i], tmp)
            rigid_inv_mul(A[i], tmp, dT[i])
        V[i] = retract_inv(dT[i], kind)
        for k in range(6):
            V[i, k] /= dt
        ops[0] += 4
    return dT, V


@njit(cache=True)
def momenta(inertia, V, dt, kind, ops):
    """Discrete momenta ``dtau^-1(dt V)^T G V``."""
    n = V.shape[0]
    mu = np.empty((n, 6))
    x = np.empty(6)
    g = np.empty(6)
    work = np.empty((4, 6))
    for i in range(n):
        for k in range(6):
            x[k] = dt * V[i, k]
        mv_into(inertia[i], V[i], g)
        if kind == EXP:
            th = _angle(x)
            if th >= DEXPINV_ANGLE_LIMIT:
                raise DomainError("twist outside the convergence domain of dexp^-1")
            _dexpinv_dual(x, g, th, mu[i], work)
        else:
            mu[i] = mtv(dcayinv_matrix(x), g)
        ops[0] += 3
    return mu


@njit(cache=True)
def transported_momenta(V_prev, mu_prev, dt, kind, ops):
    """Previous-step momenta carried into the current body frames."""
    n = V_prev.shape[0]
    out = np.empty((n, 6))
    T = np.empty((4, 4))
    for i in range(n):
        if kind == EXP:
            exp_se3_into(V_prev[i], dt, T)
        else:
            T = cay_se3(dt * V_prev[i])
        wrench_by_adjoint(T, mu_prev[i], out[i])
        ops[0] += 2
    return out


@njit(cache=True)
def gravity_wrenches(parent, A, mass, com, gravity):
    """Gravity wrench on each body in its own frame, from joint transforms."""
    n = mass.shape[0]
    # gravity direction in each body frame, carried down the tree
    g = np.empty((n, 3))
    out = np.empty((n, 6))
    for i in range(n):
        p = parent[i]
        gp = gravity if p < 0 else g[p]
        for k in range(3):
            g[i, k] = A[i, 0, k] * gp[0] + A[i, 1, k] * gp[1] + A[i, 2, k] * gp[2]
        f0, f1, f2 = mass[i] * g[i, 0], mass[i] * g[i, 1], mass[i] * g[i, 2]
        c0, c1, c2 = com[i, 0], com[i, 1], com[i, 2]
        out[i, 0] = c1 * f2 - c2 * f1
        out[i, 1] = c2 * f0 - c0 * f2
        out[i, 2] = c0 * f1 - c1 * f0
        out[i, 3] = f0
        out[i, 4] = f1
        out[i, 5] = f2
    return out


@njit(cache=True)
def drnea_eval(parent, offset, screw, inertia, mass, com, gravity, dt, q_curr,
               q_next, transport, f_ext, tau, kind, ops):
    """Residual plus the per-body quantities the Jacobian can reuse.

    Returns ``(residual, mu, V, A, dT)``.
    """
    A = joint_transforms(offset, screw, q_curr)
    # impulses that do not depend on q_next
    fixed = transport + f_ext + dt * gravity_wrenches(parent, A, mass, com, gravity)
    return residual_core(parent, offset, screw, inertia, dt, A, fixed, q_next,
                         tau, kind, ops)


@njit(cache=True)
def residual_core(parent, offset, screw, inertia, dt, A, fixed, q_next, tau,
                  kind, ops):
    """DRNEA backward pass given the joint transforms at ``q_curr``."""
    n = q_next.shape[0]
    dT, V = relative_motion(parent, A, joint_transforms(offset, screw, q_next),
                            dt, kind, ops)
    mu = momenta(inertia, V, dt, kind, ops)
    F = mu - fixed
    residual = np.empty(n)
    for i in range(n - 1, -1, -1):
        residual[i] = dot6(screw[i], F[i]) - tau[i]
        p = parent[i]
        if p >= 0:
            wrench_to_parent(A[i], F[i], F[p])
        ops[0] += 2
    return residual, mu, V, A, dT


@njit(cache=True)
def drnea(parent, offset, screw, inertia, mass, com, gravity, dt, q_curr,
          q_next, transport, f_ext, tau, kind, ops):
    out = drnea_eval(parent, offset, screw, inertia, mass, com, gravity, dt,
                     q_curr, q_next, transport, f_ext, tau, kind, ops)
    return out[0], out[1], out[2]


@njit(cache=True)
def drnea_jacobian(parent, offset, screw, inertia, dt, q_curr, q_next, kind,
                   ops):
    """Exact derivative of the DRNEA residual with respect to ``q_next``."""
    A, dT, V = displacements(parent, offset, screw, q_curr, q_next, dt, kind,
                             ops)
    return jacobian_core(parent, screw, inertia, dt, A, dT, V, kind, ops)


@njit(cache=True)
def jacobian_core(parent, screw, inertia, dt, A, dT, V, kind, ops):
    """Jacobian from the per-body quantities of a residual evaluation.

    The forward pass propagates right-trivialised displacement derivatives
    seeded by each joint; the backward pass carries momentum derivatives to
    the root. Only (body, joint) pairs that can be nonzero are visited.
    """
    n = V.shape[0]
    xi = np.zeros((n, n, 6))
    dF = np.zeros((n, n, 6))
    dep = np.zeros((n, n), dtype=np.bool_)
    Xc = np.empty((n, 6, 6))
    for i in range(n):
        p = parent[i]
        adjoint_inv_into(A[i], Xc[i])
        if p >= 0:
            for j in range(n):
                if dep[p, j]:
                    dep[i, j] = True
                    xi[i, j] = mv(Xc[i], xi[p, j])
                    ops[0] += 1
        dep[i, i] = True
        xi[i, i] = mv(adjoint(dT[i]), screw[i])
        x = dt * V[i]
        m = mv(inertia[i], V[i])
        Dinv = dtau_inv_matrix(x, kind)
        DtG = mm(Dinv.T, inertia[i]) / dt
        ops[0] += 2
        for j in range(n):
            if dep[i, j]:
                dx = mv(Dinv, xi[i, j])
                dF[i, j] = (dtau_inv_directional_dual(x, dx, m, kind)
                            + mv(DtG, dx))
                ops[0] += 3
    J = np.zeros((n, n))
    reach = dep.copy()
    for i in range(n - 1, -1, -1):
        p = parent[i]
        for j in range(n):
            if reach[i, j]:
                J[i, j] = dot6(screw[i], dF[i, j])
                if p >= 0:
                    dF[p, j] += mtv(Xc[i], dF[i, j])
                    reach[p, j] = True
                ops[0] += 1
    return J


@njit(cache=True)
def articulated_to_parent(IA, U, D, X, tmp, out):
    """``out += X^T (IA - U U^T / D) X``, with ``tmp`` as 6x6 scratch."""
    for r in range(6):
        ur = U[r] / D
        for c in range(6):
            acc = 0.0
            for k in range(6):
                acc += (IA[r, k] - ur * U[k]) * X[k, c]
            tmp[r, c] = acc
    for r in range(6):
        for c in range(6):
            acc = 0.0
            for k in range(6):
                acc += X[k, r] * tmp[k, c]
            out[r, c] += acc


@njit(cache=True)
def abi_solve(parent, offset, screw, inertia, q, rhs, ops):
    """Articulated-body solve of ``M(q) x = rhs`` at zero velocity, no gravity."""
    Xc, U, D = abi_factor(parent, joint_transforms(offset, screw, q), screw,
                          inertia, ops)
    return abi_apply(parent, screw, Xc, U, D, rhs, ops)


@njit(cache=True)
def abi_factor(parent, A, screw, inertia, ops):
    """Articulated inertias of ``M(q)`` from the joint transforms at ``q``.

    Returns the joint adjoints, ``U_i = IA_i S_i`` and the pivots ``D_i``,
    which is all :func:`abi_apply` needs for any right-hand side.
    """
    n = A.shape[0]
    IA = inertia.copy()
    U = np.empty((n, 6))
    D = np.empty(n)
    Xc = np.empty((n, 6, 6))
    tmp = np.empty((6, 6))
    for i in range(n - 1, -1, -1):
        adjoint_inv_into(A[i], Xc[i])
        mv_into(IA[i], screw[i], U[i])
        D[i] = dot6(screw[i], U[i])
        if D[i] < PIVOT_TOL:
            raise SingularJointError("articulated inertia pivot below 1e-12")
        p = parent[i]
        if p >= 0:
            articulated_to_parent(IA[i], U[i], D[i], Xc[i], tmp, IA[p])
        ops[0] += 2
    return Xc, U, D


@njit(cache=True)
def abi_apply(parent, screw, Xc, U, D, rhs, ops):
    """Solve ``M x = rhs`` with a factorisation from :func:`abi_factor`."""
    n = rhs.shape[0]
    pA = np.zeros((n, 6))
    u = np.empty(n)
    tmp = np.empty(6)
    for i in range(n - 1, -1, -1):
        u[i] = rhs[i] - dot6(screw[i], pA[i])
        p = parent[i]
        if p >= 0:
            s = u[i] / D[i]
            for k in range(6):
                tmp[k] = pA[i, k] + U[i, k] * s
            mtv_add(Xc[i], tmp, pA[p])
        ops[0] += 2
    acc = np.empty((n, 6))
    out = np.empty(n)
    for i in range(n):
        p = parent[i]
        if p >= 0:
            mv_into(Xc[i], acc[p], acc[i])
        else:
            acc[i] = 0.0
        out[i] = (u[i] - dot6(U[i], acc[i])) / D[i]
        for k in range(6):
            acc[i, k] += screw[i, k] * out[i]
        ops[0] += 2
    return out


@njit(cache=True)
def body_velocities(parent, A, screw, qd):
    n = qd.shape[0]
    V = np.empty((n, 6))
    X = np.empty((6, 6))
    for i in range(n):
        p = parent[i]
        V[i] = screw[i] * qd[i]
        if p >= 0:
            adjoint_inv_into(A[i], X)
            V[i] += mv(X, V[p])
    return V


@njit(cache=True)
def aba(parent, offset, screw, inertia, gravity, q, qd, tau, ops):
    """Articulated-body forward dynamics with velocity-product and gravity terms."""
    n = q.shape[0]
    A = joint_transforms(offset, screw, q)
    Xc = np.empty((n, 6, 6))
    V = np.empty((n, 6))
    c = np.empty((n, 6))
    IA = inertia.copy()
    pA = np.empty((n, 6))
    tmp = np.empty((6, 6))
    sq = np.empty(6)
    g = np.empty(6)
    for i in range(n):
        p = parent[i]
        adjoint_inv_into(A[i], Xc[i])
        for k in range(6):
            sq[k] = screw[i, k] * qd[i]
        if p >= 0:
            mv_into(Xc[i], V[p], V[i])
            for k in range(6):
                V[i, k] += sq[k]
        else:
            V[i] = sq
        bracket_into(V[i], sq, c[i])
        mv_into(inertia[i], V[i], g)
        coad_into(V[i], g, pA[i])
        for k in range(6):
            pA[i, k] = -pA[i, k]
        ops[0] += 4
    U = np.empty((n, 6))
    D = np.empty(n)
    u = np.empty(n)
    for i in range(n - 1, -1, -1):
        mv_into(IA[i], screw[i], U[i])
        D[i] = dot6(screw[i], U[i])
        if D[i] < PIVOT_TOL:
            raise SingularJointError("articulated inertia pivot below 1e-12")
        u[i] = tau[i] - dot6(screw[i], pA[i])
        p = parent[i]
        if p >= 0:
            # Ia c = IA c - U (U.c) / D
            mv_into(IA[i], c[i], g)
            s = (u[i] - dot6(U[i], c[i])) / D[i]
            for k in range(6):
                g[k] += pA[i, k] + U[i, k] * s
            articulated_to_parent(IA[i], U[i], D[i], Xc[i], tmp, IA[p])
            mtv_add(Xc[i], g, pA[p])
        ops[0] += 4
    base = np.zeros(6)
    base[3:] = -gravity
    acc = np.empty((n, 6))
    qdd = np.empty(n)
    for i in range(n):
        p = parent[i]
        mv_into(Xc[i], acc[p] if p >= 0 else base, acc[i])
        for k in range(6):
            acc[i, k] += c[i, k]
        qdd[i] = (u[i] - dot6(U[i], acc[i])) / D[i]
        for k in range(6):
            acc[i, k] += screw[i, k] * qdd[i]
        ops[0] += 2
    return qdd


@njit(cache=True)
def rnea(parent, offset, screw, inertia, gravity, q, qd, qdd, ops):
    n = q.shape[0]
    A = joint_transforms(offset, screw, q)
    Xc = np.empty((n, 6, 6))
    V = np.empty((n, 6))
    acc = np.empty((n, 6))
    base = np.zeros(6)
    base[3:] = -gravity
    for i in range(n):
        p = parent[i]
        adjoint_inv_into(A[i], Xc[i])
        sq = screw[i] * qd[i]
        if p >= 0:
            V[i] = mv(Xc[i], V[p]) + sq
            acc[i] = mv(Xc[i], acc[p])
        else:
            V[i] = sq
            acc[i] = mv(Xc[i], base)
        acc[i] += screw[i] * qdd[i] + bracket(V[i], sq)
        ops[0] += 3
    F = np.zeros((n, 6))
    tau = np.empty(n)
    for i in range(n - 1, -1, -1):
        F[i] += mv(inertia[i], acc[i]) - coad(V[i], mv(inertia[i], V[i]))
        tau[i] = dot6(screw[i], F[i])
        p = parent[i]
        if p >= 0:
            F[p] += mtv(Xc[i], F[i])
        ops[0] += 2
    return tau
