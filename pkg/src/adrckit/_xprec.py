"""Extended-precision kernels for gain synthesis and spectrum measurement.

The closed-loop coefficient map squares the gain magnitudes, so plain
double precision loses up to nine digits between requested and realized
pole positions at higher plant orders.  Everything here runs in
longdouble (and complex longdouble), which buys enough headroom that
the rounded double-precision gains are as good as double allows.
"""

from __future__ import annotations

import numpy as np

from .closedloop import _assemble
from .poly import _char_poly_coeffs, real_split

LD = np.longdouble
CLD = np.clongdouble

__all__ = [
    "SingularMap",
    "char_poly_xp",
    "solve_xp",
    "poly_from_roots_xp",
    "recursion_transform",
    "probe_transform",
    "transform_desired_xp",
    "extract_gains_xp",
    "newton_vs_q",
    "refine_eigenvalues",
    "pole_residual",
]


class SingularMap(ArithmeticError):
    """The nominal-to-perturbed coefficient map is numerically singular."""


def char_poly_xp(A) -> np.ndarray:
    """Ascending monic characteristic coefficients in the input dtype."""
    return _char_poly_coeffs(np.asarray(A))


def polymul_xp(p, q) -> np.ndarray:
    out = np.zeros(len(p) + len(q) - 1, dtype=np.result_type(p.dtype, q.dtype))
    for i, pi in enumerate(p):
        out[i:i + len(q)] += pi * q
    return out


def polyval_xp(coeffs, x):
    """Horner evaluation, ascending coefficients, array-valued x."""
    r = np.zeros_like(x)
    for c in coeffs[::-1]:
        r = r * x + c
    return r


def solve_xp(A, rhs) -> np.ndarray:
    """Gaussian elimination with partial pivoting, dtype-preserving."""
    A = np.array(A, copy=True)
    b = np.array(rhs, copy=True, dtype=A.dtype)
    n = A.shape[0]
    for i in range(n):
        p = i + int(np.argmax(np.abs(A[i:, i])))
        if A[p, i] == 0:
            raise ZeroDivisionError("singular matrix")
        if p != i:
            A[[i, p]] = A[[p, i]]
            b[[i, p]] = b[[p, i]]
        for j in range(i + 1, n):
            f = A[j, i] / A[i, i]
            A[j, i:] -= f * A[i, i:]
            b[j] -= f * b[i]
    x = np.zeros(n, dtype=A.dtype)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - A[i, i + 1:] @ x[i + 1:]) / A[i, i]
    return x


def poly_from_roots_xp(roots) -> np.ndarray:
    """Monic real longdouble polynomial from a conjugate-closed root set."""
    roots = np.asarray(roots, dtype=CLD)
    out = np.array([1], dtype=CLD)
    reals = [r for r in roots if abs(r.imag) <= 1e-12 * max(1.0, abs(r))]
    comps = [r for r in roots if abs(r.imag) > 1e-12 * max(1.0, abs(r))]
    pos = sorted((r for r in comps if r.imag > 0),
                 key=lambda z: (z.real, z.imag))
    neg = sorted((r for r in comps if r.imag < 0),
                 key=lambda z: (z.real, -z.imag))
    if len(pos) != len(neg):
        raise ValueError("root set is not conjugate-closed")
    for rp, rn in zip(pos, neg):
        # pair by sorted order; symmetrize so the quadratic is exactly real
        re = (rp.real + rn.real) / 2
        im = (rp.imag - rn.imag) / 2
        quad = np.array([re * re + im * im, -2 * re, 1], dtype=CLD)
        out = polymul_xp(out, quad)
    for r in reals:
        out = polymul_xp(out, np.array([-r, 1], dtype=CLD))
    return out.real.astype(LD)


def _build_cl_xp(a, b, K, G, b_hat) -> np.ndarray:
    return _assemble(a, b, K, G, b_hat, dtype=LD)


def recursion_transform(a, b, b_hat, q) -> np.ndarray:
    """Order-3 nominal coefficients by the triangular back-substitution.

    ``q`` is the ascending non-leading coefficient vector (length 7) of
    the desired characteristic polynomial; returns the ascending
    non-leading nominal vector, in the dtype of the inputs.
    """
    a = np.asarray(a)
    dtype = np.result_type(a.dtype, np.asarray(q).dtype)
    a1, a2, a3 = np.asarray(a, dtype=dtype)
    q = np.asarray(q, dtype=dtype)
    s = np.asarray(b_hat, dtype=dtype) / np.asarray(b, dtype=dtype)
    qh = np.zeros(7, dtype=dtype)
    qh[6] = q[6] + a3
    qh[5] = q[5] + a2 + a3 * qh[6]
    qh[4] = q[4] + a1 + a2 * qh[6] + a3 * qh[5]
    qh[3] = s * (q[3] + a1 * qh[6] + a2 * qh[5] + a3 * qh[4])
    qh[2] = s * (q[2] + a1 * qh[5] + a2 * qh[4])
    qh[1] = s * (q[1] + a1 * qh[4])
    qh[0] = s * q[0]
    return qh


def probe_transform(a, b, b_hat):
    """Identify the affine map q = L qh + c by probing the closed loop.

    Columns of L are differences of characteristic coefficient vectors
    at unit gain settings whose nominal images form a basis; c is the
    zero-gain image.  Everything in longdouble.
    """
    a = np.asarray(a, dtype=LD)
    rho = a.size
    n = 2 * rho + 1
    zK = np.zeros(rho, dtype=LD)
    zG = np.zeros(rho + 1, dtype=LD)

    def q_of(K, G):
        return char_poly_xp(_build_cl_xp(a, b, K, G, b_hat))[:n]

    c = q_of(zK, zG)
    L = np.zeros((n, n), dtype=LD)
    for m in range(1, rho + 1):
        # K = e_m alone has nominal image e_{rho+m}
        K = zK.copy()
        K[m - 1] = 1
        L[:, rho + m] = q_of(K, zG) - c
    G1 = zG.copy()
    G1[rho] = 1
    # G = e_{rho+1} alone has nominal image e_rho
    L[:, rho] = q_of(zK, G1) - c
    for j in range(2, rho + 2):
        # K = e_1 with G = e_j images e_{2rho+1-j} + e_{rho+1} + e_{rho+1-j}
        K = zK.copy()
        K[0] = 1
        Gj = zG.copy()
        Gj[j - 1] = 1
        v = q_of(K, Gj) - c
        L[:, rho + 1 - j] = v - L[:, 2 * rho + 1 - j] - L[:, rho + 1]
    return L, c


def transform_desired_xp(a, b, b_hat, q_monic) -> np.ndarray:
    """Nominal monic coefficient vector for a desired monic vector.

    Uses the closed-form back-substitution at order 3 and the probed
    affine map otherwise.  Raises SingularMap when the probed map cannot
    be inverted reliably.
    """
    a = np.asarray(a, dtype=LD)
    rho = a.size
    q_monic = np.asarray(q_monic, dtype=LD)
    n = 2 * rho + 1
    q = q_monic[:n]
    if rho == 3:
        qh = recursion_transform(a, b, b_hat, q)
    else:
        L, c = probe_transform(a, b, b_hat)
        cond = np.linalg.cond(L.astype(float))
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularMap(
                f"probed coefficient map has condition number {cond:.3e}"
            )
        try:
            qh = solve_xp(L, q - c)
        except ZeroDivisionError as exc:
            raise SingularMap("probed coefficient map is singular") from exc
    return np.concatenate([qh, np.ones(1, dtype=LD)])


def extract_gains_xp(qhat_monic, rho: int, policy):
    """Factor the nominal polynomial and read the gains off the factors.

    Roots are found in double, polished by Newton in complex longdouble,
    split conjugate-atomically by ``policy``, and the two factors are
    rebuilt in longdouble.  A damped Newton step on (K, G) against the
    nominal coefficients removes the rounding incurred by the root trip.
    Returns (K, G, controller_factor, observer_factor) in longdouble.
    """
    qhat_monic = np.asarray(qhat_monic, dtype=LD)
    n = qhat_monic.size - 1
    if n != 2 * rho + 1:
        raise ValueError("nominal polynomial degree must be 2*rho + 1")
    r = np.polynomial.polynomial.polyroots(
        qhat_monic.astype(float)).astype(CLD)
    der = np.arange(1, n + 1, dtype=LD) * qhat_monic[1:]
    for _ in range(4):
        r = r - polyval_xp(qhat_monic, r) / polyval_xp(der, r)
    ctrl_sel, obs_sel = real_split(r.astype(complex), (rho, rho + 1), policy)

    used = np.zeros(n, dtype=bool)

    def take(sel):
        out = np.empty(sel.size, dtype=CLD)
        for i, s in enumerate(sel):
            j = int(np.argmin(np.abs(r.astype(complex) - s) + used * 1e18))
            out[i] = r[j]
            used[j] = True
        return out

    cpoly = poly_from_roots_xp(take(ctrl_sel))
    opoly = poly_from_roots_xp(take(obs_sel))
    K = cpoly[:-1].copy()
    G = opoly[:-1][::-1].copy()
    qhat = qhat_monic[:n]

    def residual(K, G):
        ctrl = np.concatenate([K, np.ones(1, dtype=LD)])
        obs = np.concatenate([G[::-1], np.ones(1, dtype=LD)])
        return polymul_xp(ctrl, obs)[:n] - qhat, ctrl, obs

    res, ctrl, obs = residual(K, G)
    for _ in range(3):
        # Sylvester-structured Jacobian of the factor product
        J = np.zeros((n, n), dtype=LD)
        for i in range(rho):
            seg = obs[:n - i]
            J[i:i + seg.size, i] = seg
        for j in range(rho + 1):
            sh = rho - j
            seg = ctrl[:n - sh]
            J[sh:sh + seg.size, rho + j] = seg
        try:
            dv = solve_xp(J, res)
        except ZeroDivisionError:
            break
        step = LD(1)
        improved = False
        for _ in range(4):
            Kt = K - step * dv[:rho]
            Gt = G - step * dv[rho:]
            rt, ct, ot = residual(Kt, Gt)
            if np.abs(rt).max() < np.abs(res).max():
                K, G, res, ctrl, obs = Kt, Gt, rt, ct, ot
                improved = True
                break
            step /= 2
        if not improved:
            break
    ctrl_final = np.concatenate([K, np.ones(1, dtype=LD)])
    obs_final = np.concatenate([G[::-1], np.ones(1, dtype=LD)])
    return K, G, ctrl_final, obs_final


def newton_vs_q(a, b, b_hat, K, G, q, iters: int = 8):
    """Damped Newton on (K, G) against the realized characteristic poly.

    Targets the actual closed-loop coefficients rather than the nominal
    factorization, absorbing the transform's own rounding.  Keeps the
    best iterate seen.  Returns (K, G) in double plus the relative
    coefficient residual that remained.
    """
    a = np.asarray(a, dtype=LD)
    rho = a.size
    n = 2 * rho + 1
    q = np.asarray(q, dtype=LD)
    scale = np.abs(q).max()
    v = np.concatenate([np.asarray(K, dtype=LD), np.asarray(G, dtype=LD)])

    def defect(vv):
        A = _build_cl_xp(a, b, vv[:rho], vv[rho:], b_hat)
        return q - char_poly_xp(A)[:n]

    r = defect(v)
    best_v, best_r = v.copy(), np.abs(r).max()
    h = LD(2.0) ** -30
    for _ in range(iters):
        J = np.zeros((n, n), dtype=LD)
        for j in range(n):
            vp = v.copy()
            dj = h * max(LD(1), abs(v[j]))
            vp[j] += dj
            J[:, j] = (defect(vp) - r) / (-dj)
        try:
            dv = solve_xp(J, -r)
        except ZeroDivisionError:
            break
        step = LD(1)
        improved = False
        for _ in range(6):
            vt = v + step * dv
            rt = defect(vt)
            if np.abs(rt).max() < np.abs(r).max():
                v, r = vt, rt
                improved = True
                break
            step /= 2
        if not improved:
            break
        if np.abs(r).max() < best_r:
            best_v, best_r = v.copy(), np.abs(r).max()
        if best_r < scale * LD(1e-18):
            break
    return (np.asarray(best_v[:rho], dtype=float),
            np.asarray(best_v[rho:], dtype=float),
            float(best_r / scale))


def _lu_factor_cx(M):
    """LU with partial pivoting in complex longdouble."""
    n = M.shape[0]
    U = M.copy()
    piv = np.arange(n)
    L = np.eye(n, dtype=CLD)
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(U[k:, k])))
        if p != k:
            U[[k, p], :] = U[[p, k], :]
            L[[k, p], :k] = L[[p, k], :k]
            piv[[k, p]] = piv[[p, k]]
        if U[k, k] == 0:
            raise ZeroDivisionError("singular matrix")
        m = U[k + 1:, k] / U[k, k]
        L[k + 1:, k] = m
        U[k + 1:, k:] -= m[:, None] * U[k, k:]
    if U[n - 1, n - 1] == 0:
        raise ZeroDivisionError("singular matrix")
    return L, U, piv


def _lu_solve_cx(L, U, piv, B):
    """Solve with a factored matrix; B may be a vector or a matrix."""
    n = L.shape[0]
    Y = B[piv].astype(CLD)
    for i in range(1, n):
        Y[i] -= L[i, :i] @ Y[:i]
    for i in range(n - 1, -1, -1):
        Y[i] = (Y[i] - U[i, i + 1:] @ Y[i + 1:]) / U[i, i]
    return Y


def refine_eigenvalues(A, lams, iters: int = 5) -> np.ndarray:
    """Newton polish of eigenvalue estimates via the resolvent trace.

    Each estimate moves by -1 / trace((lam I - A)^-1), computed in
    complex longdouble; the step is the exact Newton step for
    det(lam I - A) without ever forming the determinant's coefficients.
    Oversized steps are rejected so a bad estimate cannot wander.
    """
    A_cx = np.asarray(A, dtype=CLD)
    n = A_cx.shape[0]
    eye = np.eye(n, dtype=CLD)
    out = []
    for lam in lams:
        lam = CLD(lam)
        for _ in range(iters):
            try:
                L, U, piv = _lu_factor_cx(lam * eye - A_cx)
                tr = np.trace(_lu_solve_cx(L, U, piv, eye))
            except ZeroDivisionError:
                break
            if tr == 0 or not np.isfinite(complex(tr)):
                break
            step = -1.0 / tr
            if abs(complex(step)) > 0.1:
                break
            lam = lam + step
            if abs(complex(step)) < 1e-18 * max(1.0, abs(complex(lam))):
                break
        out.append(complex(lam))
    return np.array(out)


def pole_residual(A, targets) -> float:
    """Max distance between the spectrum of A and the target poles.

    Eigenvalues are polished before matching so the measurement noise of
    the eigensolver does not masquerade as placement error.
    """
    from scipy.optimize import linear_sum_assignment

    lams = refine_eigenvalues(A, np.linalg.eigvals(np.asarray(A, dtype=float)))
    cost = np.abs(lams[:, None] - np.asarray(targets, dtype=complex)[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())
