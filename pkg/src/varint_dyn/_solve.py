"""Compiled root-finding loops for the discrete Euler-Lagrange residual.

The loops live in compiled code so that a step's wall time measures the
algorithms rather than interpreter overhead. Dense linear solves inside
numba go through SciPy's LAPACK bindings.
"""

import numpy as np
from numba import njit

from . import _kernels as K

RIQN = 0
NEWTON = 1
BROYDEN = 2

GUESS_HOLD = 0
GUESS_EULER = 1
GUESS_FD = 2
GUESS_ZERO = 3
GUESS_GIVEN = 4

MAX_HALVINGS = 10


@njit(cache=True)
def _maxabs(x):
    out = 0.0
    for v in x:
        a = abs(v)
        if a > out:
            out = a
        elif a != a:
            return a
    return out


@njit(cache=True)
def predict(guess, parent, offset, screw, inertia, gravity, dt, q_prev, q_curr,
            tau, q_given, ops):
    """Initial guess for ``q_next``; ``tau`` holds joint impulses."""
    if guess == GUESS_HOLD:
        return q_curr.copy()
    if guess == GUESS_EULER:
        return 2.0 * q_curr - q_prev
    if guess == GUESS_ZERO:
        return np.zeros_like(q_curr)
    if guess == GUESS_GIVEN:
        return q_given.copy()
    qd = (q_curr - q_prev) / dt
    qdd = K.aba(parent, offset, screw, inertia, gravity, q_curr, qd, tau / dt, ops)
    return q_curr + dt * (qd + dt * qdd)


@njit(cache=True)
def solve_loop(method, parent, offset, screw, inertia, dt, q_curr, A, fixed, tau,
               kind, q0, tol, max_iter, line_search, refresh_mass, norms, ops):
    """Iterate ``q <- q - step`` until the residual's max-norm is within ``tol``.

    ``A`` holds the joint transforms at ``q_curr`` and ``fixed`` the impulses
    that do not depend on the iterate. ``norms`` receives the residual norm
    before the first iteration and after each one. Returns the final iterate,
    the best iterate seen, the iteration count, and the momenta/velocities at
    the final iterate.
    """
    n = q0.shape[0]
    q = q0.copy()
    res, mu, V, B, dT = K.residual_core(parent, offset, screw, inertia, dt, A,
                                        fixed, q, tau, kind, ops)
    r = _maxabs(res)
    norms[0] = r
    best_q = q.copy()
    best_r = r
    converged = r <= tol
    # frozen mass matrix at q_curr, factorised once for RIQN and the Broyden seed
    if not converged and (method == BROYDEN or (method == RIQN and not refresh_mass)):
        Xc, U, D = K.abi_factor(parent, A, screw, inertia, ops)
    else:
        Xc, U, D = np.empty((0, 6, 6)), np.empty((0, 6)), np.empty(0)
    H = np.empty((0, 0))
    if method == BROYDEN and not converged:
        # seed the inverse-Jacobian estimate with dt * M(q_curr)^-1
        H = np.empty((n, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = dt
            H[:, j] = K.abi_apply(parent, screw, Xc, U, D, e, ops)
            e[j] = 0.0
    it = 0
    # written as 'not r <= tol' so that a NaN residual never counts as converged
    while not r <= tol and it < max_iter and not np.isnan(r):
        if method == RIQN:
            if refresh_mass:
                step = dt * K.abi_solve(parent, offset, screw, inertia, q, res, ops)
            else:
                step = dt * K.abi_apply(parent, screw, Xc, U, D, res, ops)
        elif method == NEWTON:
            J = K.jacobian_core(parent, screw, inertia, dt, A, dT, V, kind, ops)
            step = np.linalg.solve(J, res)
        else:
            step = H @ res
        q_new = q - step
        res_new, mu, V, B, dT = K.residual_core(parent, offset, screw, inertia, dt,
                                                A, fixed, q_new, tau, kind, ops)
        r_new = _maxabs(res_new)
        if line_search:
            alpha = 1.0
            halvings = 0
            while r_new > r and halvings < MAX_HALVINGS:
                alpha *= 0.5
                halvings += 1
                q_new = q - alpha * step
                res_new, mu, V, B, dT = K.residual_core(
                    parent, offset, screw, inertia, dt, A, fixed, q_new, tau, kind,
                    ops)
                r_new = _maxabs(res_new)
        if method == BROYDEN:
            s = q_new - q
            y = res_new - res
            Hy = H @ y
            denom = s @ Hy
            if abs(denom) > 1e-300:
                H += np.outer(s - Hy, s @ H) / denom
        q = q_new
        res = res_new
        r = r_new
        it += 1
        norms[it] = r
        if r < best_r:
            best_r = r
            best_q[:] = q
    return q, best_q, it, mu, V


@njit(cache=True)
def variational_step(method, guess, parent, offset, screw, inertia, mass, com,
                     gravity, dt, q_prev, q_curr, V_prev, mu_prev, have_prev,
                     f_ext, tau, kind, q_given, tol, max_iter, line_search,
                     refresh_mass, norms, ops):
    """Momentum transport, initial guess and root solve in one call."""
    if not have_prev:
        _, _, V_prev = K.displacements(parent, offset, screw, q_prev, q_curr, dt,
                                       kind, ops)
        mu_prev = K.momenta(inertia, V_prev, dt, kind, ops)
    A = K.joint_transforms(offset, screw, q_curr)
    fixed = (K.transported_momenta(V_prev, mu_prev, dt, kind, ops) + f_ext
             + dt * K.gravity_wrenches(parent, A, mass, com, gravity))
    q0 = predict(guess, parent, offset, screw, inertia, gravity, dt, q_prev,
                 q_curr, tau, q_given, ops)
    return solve_loop(method, parent, offset, screw, inertia, dt, q_curr, A, fixed,
                      tau, kind, q0, tol, max_iter, line_search, refresh_mass,
                      norms, ops)
