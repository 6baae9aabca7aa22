"""Closed-loop assembly, coefficient formulas, and controller transfer functions.

The loop couples an integrator-chain plant with an extended observer and
the feedback u = -(K x_hat + d_hat) / b_hat.  In the coordinates
[x; e; f], where e = x_hat - x is the observer error and
f = (b/b_hat) d_hat - d is the scaled disturbance-estimate error, the
dynamics are linear with a constant matrix A_cl; a constant disturbance
enters only through the initial value of f.
"""

from __future__ import annotations

import numpy as np

from .plant import CanonicalPlant
from .poly import RealPoly, char_poly

__all__ = [
    "UnsupportedOrder",
    "ClosedLoopSystem",
    "RationalTF",
    "build_closed_loop",
    "coeff_match",
    "adrc_transfer",
    "model_based_transfer",
    "match_model_based",
    "pid_closed_loop",
    "pid_necessary_condition",
]


class UnsupportedOrder(ValueError):
    """The operation is only defined for third-order plants."""


class ClosedLoopSystem:
    """Closed loop in [x; e; f] coordinates: dz/dt = A_cl z + B_cl gamma."""

    __slots__ = ("A_cl", "B_cl", "C_cl")

    def __init__(self, A_cl, B_cl, C_cl):
        self.A_cl = np.asarray(A_cl, dtype=float)
        self.B_cl = np.asarray(B_cl, dtype=float)
        self.C_cl = np.asarray(C_cl, dtype=float)


class RationalTF:
    """Ratio of two real polynomials."""

    __slots__ = ("num", "den")

    def __init__(self, num: RealPoly, den: RealPoly):
        if not isinstance(num, RealPoly):
            num = RealPoly(num)
        if not isinstance(den, RealPoly):
            den = RealPoly(den)
        self.num = num
        self.den = den

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def __repr__(self):
        return f"RationalTF(num={self.num!r}, den={self.den!r})"


def _assemble(a, b, K, G, b_hat, dtype=float):
    """Closed-loop matrix over [x; e; f] for any plant order.

    Generic over the floating dtype so the same assembly can run in
    extended precision.
    """
    a = np.asarray(a, dtype=dtype)
    K = np.asarray(K, dtype=dtype)
    G = np.asarray(G, dtype=dtype)
    rho = a.size
    n = 2 * rho + 1
    ratio = np.asarray(b, dtype=dtype) / np.asarray(b_hat, dtype=dtype)
    A = np.zeros((n, n), dtype=dtype)
    one = np.asarray(1, dtype=dtype)
    for i in range(rho - 1):
        A[i, i + 1] = one
    A[rho - 1, :rho] = a - ratio * K
    A[rho - 1, rho:2 * rho] = -ratio * K
    A[rho - 1, 2 * rho] = -one
    for i in range(rho - 1):
        A[rho + i, rho + i + 1] = one
        A[rho + i, rho] += -G[i]
    A[2 * rho - 1, :rho] = (ratio - one) * K - a
    A[2 * rho - 1, rho:2 * rho] += (ratio - one) * K
    A[2 * rho - 1, rho] += -G[rho - 1]
    A[2 * rho - 1, 2 * rho] = one
    A[2 * rho, rho] = -ratio * G[rho]
    return A


def build_closed_loop(plant: CanonicalPlant, gains) -> ClosedLoopSystem:
    """Assemble (A_cl, B_cl, C_cl) for a plant and a gain set.

    ``gains`` provides K (length rho), G (length rho+1), and b_hat.  The
    disturbance-rate input B_cl has +1 at the last plant row and -1 at
    the last observer-error row; C_cl selects the plant state x.
    """
    K = np.asarray(gains.K, dtype=float)
    G = np.asarray(gains.G, dtype=float)
    rho = plant.rho
    if K.size != rho or G.size != rho + 1:
        raise ValueError("gain dimensions do not match the plant order")
    A = _assemble(plant.a, plant.b, K, G, gains.b_hat)
    n = 2 * rho + 1
    B = np.zeros(n)
    B[rho - 1] = 1.0
    B[2 * rho - 1] = -1.0
    C = np.zeros((rho, n))
    C[:, :rho] = np.eye(rho)
    return ClosedLoopSystem(A, B, C)


def coeff_match(gains, plant: CanonicalPlant) -> RealPoly:
    """Closed-form characteristic coefficients for a third-order plant.

    Evaluates the seven closed-form expressions for the coefficients of
    the degree-7 characteristic polynomial directly, independently of
    any matrix computation, so it can serve as a cross-check against
    char_poly(A_cl).
    """
    if plant.rho != 3:
        raise UnsupportedOrder("closed-form coefficients require order 3")
    a1, a2, a3 = plant.a
    k1, k2, k3 = np.asarray(gains.K, dtype=float)
    g1, g2, g3, g4 = np.asarray(gains.G, dtype=float)
    r = plant.b / gains.b_hat
    q6 = g1 + k3 - a3
    q5 = g2 + k2 + g1 * k3 - a2 - a3 * (g1 + k3)
    q4 = (g3 + k1 + g1 * k2 + g2 * k3 - a1 - a2 * (g1 + k3)
          - a3 * (k2 + g2 + g1 * k3))
    q3 = (r * (g4 + g1 * k1 + g2 * k2 + g3 * k3)
          - a1 * (g1 + k3)
          - a2 * (g2 + k2 + g1 * k3)
          - a3 * (g3 + k1 + g1 * k2 + g2 * k3))
    q2 = (r * (g2 * k1 + g3 * k2 + g4 * k3)
          - a1 * (g2 + k2 + g1 * k3)
          - a2 * (g3 + k1 + g1 * k2 + g2 * k3))
    q1 = (r * (g3 * k1 + g4 * k2)
          - a1 * (g3 + k1 + g1 * k2 + g2 * k3))
    q0 = r * g4 * k1
    return RealPoly([q0, q1, q2, q3, q4, q5, q6, 1.0])


def adrc_transfer(gains) -> RationalTF:
    """Transfer function from measurement y to control u for order 3.

    num = qh3 s^3 + qh2 s^2 + qh1 s + qh0 and
    den = b_hat * s * (s^3 + qh6 s^2 + qh5 s + qh4), where the qh are
    the nominal coefficients of the gain set.  The denominator scale is
    the controller's own input-coefficient estimate b_hat, the only
    input coefficient the control law contains.
    """
    from .synthesis import nominal_coeffs

    K = np.asarray(gains.K, dtype=float)
    G = np.asarray(gains.G, dtype=float)
    if K.size != 3 or G.size != 4:
        raise UnsupportedOrder("transfer function requires order 3")
    qh = nominal_coeffs(gains).coeffs
    qh = np.pad(qh, (0, 7 - qh.size))
    b_hat = float(gains.b_hat)
    num = RealPoly(qh[:4])
    den = RealPoly([0.0, b_hat * qh[4], b_hat * qh[5], b_hat * qh[6], b_hat])
    return RationalTF(num, den)


def model_based_transfer(k_star, g_star, plant: CanonicalPlant) -> RationalTF:
    """Transfer function of the controller built on the exact plant model.

    The observer uses the true (a, b) and the feedback uses 1/b; the
    closed-form numerator and denominator coefficients are evaluated
    directly.
    """
    if plant.rho != 3:
        raise UnsupportedOrder("transfer function requires order 3")
    a1, a2, a3 = plant.a
    b = plant.b
    k1, k2, k3 = np.asarray(k_star, dtype=float)
    g1, g2, g3, g4 = np.asarray(g_star, dtype=float)
    n3 = g4 + g1 * k1 + g2 * k2 + g3 * k3
    n2 = (g2 * k1 + g3 * k2 + g4 * k3
          - a3 * g4 - a3 * g1 * k1 - a3 * g2 * k2
          + a1 * g1 * k3 + a2 * g2 * k3)
    n1 = (g3 * k1 + g4 * k2
          + a1 * g1 * k2 - a2 * g1 * k1 + a1 * g2 * k3
          - a3 * g2 * k1 - a2 * g4)
    n0 = g4 * (k1 - a1)
    d2 = g1 + k3 - a3
    d1 = g2 + k2 + g1 * k3 - a3 * g1 - a2
    d0 = g3 + k1 + g1 * k2 + g2 * k3 - a2 * g1 - a3 * g2 - a1
    num = RealPoly([n0, n1, n2, n3])
    den = RealPoly([0.0, b * d0, b * d1, b * d2, b])
    return RationalTF(num, den)


def match_model_based(k_star, g_star, plant: CanonicalPlant, b_hat,
                      policy="slowest"):
    """Model-free gain set realizing the model-based controller exactly.

    Reads the target nominal coefficients off the model-based transfer
    function (monic denominator cubic gives the top three, the numerator
    scaled by b_hat/b gives the bottom four) and extracts gains from
    them.  The returned controller has the same transfer function; the
    split policy only changes which factor each root lands in.
    """
    from .synthesis import gains_from_nominal

    b_hat = float(b_hat)
    if b_hat == 0.0:
        raise ValueError("b_hat must be nonzero")
    tf = model_based_transfer(k_star, g_star, plant)
    num = tf.num.coeffs
    den = tf.den.coeffs
    b = plant.b
    scale = b_hat / b
    qh = np.empty(8)
    qh[0:4] = scale * np.pad(num, (0, 4 - num.size))
    # den = b*s*(s^3 + d2 s^2 + d1 s + d0): ascending [0, b*d0, b*d1, b*d2, b]
    full_den = np.pad(den, (0, 5 - den.size))
    qh[4:7] = full_den[1:4] / b
    qh[7] = 1.0
    return gains_from_nominal(RealPoly(qh), plant.rho, b_hat, policy=policy)


def pid_closed_loop(plant: CanonicalPlant, kP: float, kI: float,
                    kD: float) -> np.ndarray:
    """Closed-loop matrix of PID feedback on a third-order plant.

    State is (integral of y, y, y', y'').  The trace equals a3 for any
    gains, which is the basis of the stabilizability test below.
    """
    if plant.rho != 3:
        raise UnsupportedOrder("PID closed loop requires order 3")
    a1, a2, a3 = plant.a
    b = plant.b
    return np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-b * kI, a1 - b * kP, a2 - b * kD, a3],
    ])


def pid_necessary_condition(plant: CanonicalPlant) -> bool:
    """Whether PID feedback can possibly stabilize the plant.

    The closed-loop trace is a3 regardless of gains; a Hurwitz spectrum
    needs a negative trace, so a3 < 0 is necessary.
    """
    if plant.rho != 3:
        raise UnsupportedOrder("PID criterion requires order 3")
    return bool(plant.a[2] < 0.0)


def _dual_path_check(plant: CanonicalPlant, gains) -> float:
    """Max relative coefficient gap between matrix and closed-form paths."""
    p_matrix = char_poly(build_closed_loop(plant, gains).A_cl).coeffs
    p_formula = coeff_match(gains, plant).coeffs
    scale = np.maximum(np.abs(p_formula), 1.0)
    return float(np.max(np.abs(p_matrix - p_formula) / scale))
