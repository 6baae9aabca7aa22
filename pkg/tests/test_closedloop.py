import numpy as np
import pytest

from adrckit.closedloop import (UnsupportedOrder, adrc_transfer,
                                build_closed_loop, coeff_match,
                                match_model_based, model_based_transfer,
                                pid_closed_loop, pid_necessary_condition)
from adrckit.plant import CanonicalPlant
from adrckit.poly import char_poly, _char_poly_coeffs
from adrckit.synthesis import AdrcGains, nominal_coeffs


def raw_aggregate_field(a, b, K, G, b_hat):
    """Closed loop over the raw state [x; xhat; dhat], built from the
    component equations, independent of the packaged assembly."""
    rho = len(a)
    n = 2 * rho + 1
    F = np.zeros((n, n))
    Cu = np.zeros(n)
    Cu[rho:2 * rho] = -np.asarray(K) / b_hat
    Cu[2 * rho] = -1.0 / b_hat
    # plant chain + feedback coefficients + b*u
    F[:rho - 1, 1:rho] = np.eye(rho - 1)
    F[rho - 1, :rho] = a
    F[rho - 1, :] += b * Cu
    # observer chain, +dhat and +b_hat*u on the last derivative row
    F[rho:2 * rho - 1, rho + 1:2 * rho] = np.eye(rho - 1)
    F[2 * rho - 1, 2 * rho] = 1.0
    F[2 * rho - 1, :] += b_hat * Cu
    # output-injection correction -G*(xhat1 - x1)
    for i in range(rho + 1):
        F[rho + i, rho] -= G[i]
        F[rho + i, 0] += G[i]
    return F


def test_a_cl_similar_to_raw_aggregate():
    rng = np.random.default_rng(7)
    for rho in (1, 2, 3, 4):
        for _ in range(10):
            a = rng.uniform(-3, 3, rho)
            b = rng.uniform(0.5, 3) * rng.choice([-1.0, 1.0])
            b_hat = rng.uniform(0.5, 3) * rng.choice([-1.0, 1.0])
            K = rng.uniform(-3, 3, rho)
            G = rng.uniform(-3, 3, rho + 1)
            plant = CanonicalPlant(a, b)
            cl = build_closed_loop(plant, AdrcGains(K, G, b_hat))
            F = raw_aggregate_field(a, b, K, G, b_hat)
            got = np.sort_complex(np.linalg.eigvals(cl.A_cl))
            want = np.sort_complex(np.linalg.eigvals(F))
            assert np.allclose(got, want, atol=1e-8 * max(1, abs(want).max()))


def test_b_cl_and_c_cl_placement():
    plant = CanonicalPlant([4.0, 1.0, 2.0], -1.0)
    cl = build_closed_loop(plant, AdrcGains([1.0, 2.0, 3.0],
                                            [4.0, 5.0, 6.0, 7.0], 1.0))
    want_B = np.zeros(7)
    want_B[2] = 1.0
    want_B[5] = -1.0
    assert np.array_equal(cl.B_cl, want_B)
    assert np.array_equal(cl.C_cl, np.hstack([np.eye(3), np.zeros((3, 4))]))


def test_coeff_match_agrees_with_char_poly():
    rng = np.random.default_rng(8)
    plant_draws = 200
    worst = 0.0
    for _ in range(plant_draws):
        a = rng.uniform(-5, 5, 3)
        b = rng.uniform(0.5, 5) * rng.choice([-1.0, 1.0])
        b_hat = rng.uniform(0.5, 5) * rng.choice([-1.0, 1.0])
        gains = AdrcGains(rng.uniform(-5, 5, 3), rng.uniform(-5, 5, 4), b_hat)
        plant = CanonicalPlant(a, b)
        closed = coeff_match(gains, plant)
        direct = char_poly(build_closed_loop(plant, gains).A_cl)
        scale = np.maximum(np.abs(direct.coeffs), 1.0)
        worst = max(worst, float(
            np.max(np.abs(closed.coeffs - direct.coeffs) / scale)))
    assert worst < 1e-10


def test_coeff_match_requires_order_three():
    plant = CanonicalPlant([1.0, 2.0], 1.0)
    with pytest.raises(UnsupportedOrder):
        coeff_match(AdrcGains([1.0, 2.0], [1.0, 2.0, 3.0], 1.0), plant)


def test_char_poly_equals_factor_product_when_nominal():
    # with a = 0 and b_hat = b the loop realizes the nominal polynomial
    rng = np.random.default_rng(9)
    for rho in (1, 2, 3, 4):
        for _ in range(10):
            K = rng.uniform(-3, 3, rho)
            G = rng.uniform(-3, 3, rho + 1)
            b = rng.uniform(0.5, 3) * rng.choice([-1.0, 1.0])
            plant = CanonicalPlant(np.zeros(rho), b)
            gains = AdrcGains(K, G, b)
            cp = char_poly(build_closed_loop(plant, gains).A_cl)
            want = np.convolve(np.r_[K, 1.0], np.r_[G[::-1], 1.0])
            assert np.allclose(cp.coeffs, want, rtol=1e-9, atol=1e-9)


def controller_tf_oracle(A_obs, b_coef, K, G, b_hat):
    """Transfer function of the output-feedback controller from the
    negated measurement to u, via the adjugate recursion."""
    rho = len(K)
    n = rho + 1
    Bu = np.zeros(n)
    Bu[rho - 1] = b_coef
    L = np.r_[K, 1.0] / b_hat
    e1 = np.zeros(n)
    e1[0] = 1.0
    Acl = A_obs - np.outer(Bu, L) - np.outer(G, e1)
    den = _char_poly_coeffs(Acl)
    Ms = [None] * n
    Ms[n - 1] = np.eye(n)
    for k in range(n - 1, 0, -1):
        Ms[k - 1] = Acl @ Ms[k] + den[k] * np.eye(n)
    num = np.array([-L @ Ms[k] @ (-G) for k in range(n)])
    return num, den


def test_model_based_transfer_matches_state_space_oracle():
    rng = np.random.default_rng(10)
    for _ in range(100):
        a = rng.uniform(-5, 5, 3)
        b = rng.uniform(0.5, 5) * rng.choice([-1.0, 1.0])
        ks = rng.uniform(-5, 5, 3)
        gs = rng.uniform(-5, 5, 4)
        tf = model_based_transfer(ks, gs, CanonicalPlant(a, b))
        A_obs = np.array([[0.0, 1, 0, 0],
                          [0, 0, 1, 0],
                          [a[0], a[1], a[2], 1],
                          [0, 0, 0, 0]])
        num, den = controller_tf_oracle(A_obs, b, ks, gs, b)
        lead = tf.den.coeffs[-1]
        got_den = np.pad(tf.den.coeffs, (0, 5 - tf.den.coeffs.size)) / lead
        got_num = np.pad(tf.num.coeffs, (0, 4 - tf.num.coeffs.size)) / lead
        scale = np.maximum(np.abs(den), 1.0)
        assert np.max(np.abs(got_den - den) / scale) < 1e-8
        scale = np.maximum(np.abs(num), 1.0)
        assert np.max(np.abs(got_num - num) / scale) < 1e-8


def test_adrc_transfer_matches_state_space_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        b_hat = rng.uniform(0.5, 5) * rng.choice([-1.0, 1.0])
        K = rng.uniform(-5, 5, 3)
        G = rng.uniform(-5, 5, 4)
        tf = adrc_transfer(AdrcGains(K, G, b_hat))
        A_obs = np.zeros((4, 4))
        A_obs[0, 1] = A_obs[1, 2] = A_obs[2, 3] = 1.0
        num, den = controller_tf_oracle(A_obs, b_hat, K, G, b_hat)
        lead = tf.den.coeffs[-1]
        got_den = np.pad(tf.den.coeffs, (0, 5 - tf.den.coeffs.size)) / lead
        got_num = np.pad(tf.num.coeffs, (0, 4 - tf.num.coeffs.size)) / lead
        scale = np.maximum(np.abs(den), 1.0)
        assert np.max(np.abs(got_den - den) / scale) < 1e-8
        scale = np.maximum(np.abs(num), 1.0)
        assert np.max(np.abs(got_num - num) / scale) < 1e-8


def test_match_model_based_reproduces_transfer_function():
    rng = np.random.default_rng(12)
    for _ in range(50):
        a = rng.uniform(-5, 5, 3)
        b = rng.uniform(0.5, 5) * rng.choice([-1.0, 1.0])
        b_hat = rng.uniform(0.5, 5) * rng.choice([-1.0, 1.0])
        ks = rng.uniform(-5, 5, 3)
        gs = rng.uniform(-5, 5, 4)
        plant = CanonicalPlant(a, b)
        report = match_model_based(ks, gs, plant, b_hat)
        got = adrc_transfer(report.gains)
        want = model_based_transfer(ks, gs, plant)
        # compare on the monic-denominator representative: the raw lead
        # coefficients are b_hat and b respectively
        for gp, wp in ((got.num, want.num), (got.den, want.den)):
            gc = gp.coeffs / got.den.coeffs[-1]
            wc = wp.coeffs / want.den.coeffs[-1]
            width = max(gc.size, wc.size)
            gc = np.pad(gc, (0, width - gc.size))
            wc = np.pad(wc, (0, width - wc.size))
            scale = np.maximum(np.abs(wc), 1.0)
            assert np.max(np.abs(gc - wc) / scale) < 1e-7


def test_rational_tf_call():
    tf = adrc_transfer(AdrcGains([1.0, 2.0, 3.0], [4.0, 5.0, 6.0, 7.0], 2.0))
    s = 1.5 + 0.5j
    want = tf.num(s) / tf.den(s)
    assert tf(s) == pytest.approx(want)


def test_pid_closed_loop_structure_and_trace():
    rng = np.random.default_rng(13)
    plant = CanonicalPlant([4.0, 1.0, 2.0], -1.0)
    for _ in range(100):
        kP, kI, kD = rng.uniform(-10, 10, 3)
        A = pid_closed_loop(plant, kP, kI, kD)
        assert A.shape == (4, 4)
        assert np.trace(A) == plant.a[2]
        assert np.allclose(A[0], [0, 1, 0, 0])
        assert np.allclose(A[1], [0, 0, 1, 0])
        assert np.allclose(A[2], [0, 0, 0, 1])
        b = plant.b
        assert A[3, 0] == pytest.approx(-b * kI)
        assert A[3, 1] == pytest.approx(plant.a[0] - b * kP)
        assert A[3, 2] == pytest.approx(plant.a[1] - b * kD)
        assert A[3, 3] == plant.a[2]


def test_pid_necessary_condition():
    assert pid_necessary_condition(CanonicalPlant([4.0, 1.0, 2.0], -1.0)) \
        is False
    assert pid_necessary_condition(CanonicalPlant([-1.0, -2.0, -3.0], 1.0)) \
        is True


def test_two_bandwidth_sign_conventions_differ_only_in_b_hat():
    # the widely circulated spectrum for the two-bandwidth design on this
    # plant is realized by b_hat = -1; flipping the sign destabilizes
    plant = CanonicalPlant([4.0, 1.0, 2.0], -1.0)
    K = [1.3310000000000004, 3.6300000000000003, 3.3000000000000003]
    G = [32.0, 384.0, 2048.0, 4096.0]
    spectrum = np.array([-14.3737,
                         -9.0600 + 6.6661j, -9.0600 - 6.6661j,
                         -0.3253 + 2.8065j, -0.3253 - 2.8065j,
                         -0.0778 + 0.6079j, -0.0778 - 0.6079j])
    eigs = np.linalg.eigvals(
        build_closed_loop(plant, AdrcGains(K, G, -1.0)).A_cl)
    worst = max(min(abs(lam - mu) for lam in eigs) for mu in spectrum)
    assert worst < 5e-3
    flipped = np.linalg.eigvals(
        build_closed_loop(plant, AdrcGains(K, G, 1.0)).A_cl)
    assert flipped.real.max() > 0.0
