"""Gain synthesis: eigenvalue assignment, parameterizations, and the verifier.

The central pipeline maps a desired closed-loop spectrum to a nominal
eigenvalue-assignment problem (an affine coefficient transform), factors
the nominal polynomial into controller and observer parts, and reads the
gains off the factors.  A final Newton polish against the realized
characteristic polynomial removes the rounding the transform itself
introduces.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import _xprec
from ._xprec import LD, SingularMap
from .closedloop import build_closed_loop
from .plant import CanonicalPlant
from .poly import (
    FASTEST_TO_CONTROLLER,
    SLOWEST_TO_CONTROLLER,
    RealPoly,
    poly_from_roots,
    roots_of,
)

__all__ = [
    "SingularMap",
    "NotHurwitz",
    "AdrcGains",
    "DesiredSpectrum",
    "SynthesisReport",
    "ConjectureReport",
    "nominal_coeffs",
    "transform_desired",
    "gains_from_nominal",
    "synthesize",
    "bandwidth_gains",
    "high_gain_gains",
    "verify_conjecture",
]


class NotHurwitz(ValueError):
    """A companion matrix required to be Hurwitz is not."""

    def __init__(self, message, eigenvalues):
        super().__init__(message)
        self.eigenvalues = np.asarray(eigenvalues)


class AdrcGains:
    """Controller gain K, observer gain G, input-coefficient estimate b_hat."""

    __slots__ = ("K", "G", "b_hat")

    def __init__(self, K, G, b_hat):
        self.K = np.atleast_1d(np.asarray(K, dtype=float)).copy()
        self.G = np.atleast_1d(np.asarray(G, dtype=float)).copy()
        if self.K.ndim != 1 or self.G.ndim != 1:
            raise ValueError("K and G must be vectors")
        if self.G.size != self.K.size + 1:
            raise ValueError("G must have exactly one more entry than K")
        b_hat = float(b_hat)
        if b_hat == 0.0 or not np.isfinite(b_hat):
            raise ValueError("b_hat must be nonzero and finite")
        self.b_hat = b_hat

    @property
    def rho(self) -> int:
        return self.K.size

    def __repr__(self):
        return (f"AdrcGains(K={self.K.tolist()!r}, G={self.G.tolist()!r}, "
                f"b_hat={self.b_hat!r})")


class DesiredSpectrum:
    """A desired closed-loop spectrum, given as poles or as a monic polynomial."""

    __slots__ = ("_poles", "_coeffs")

    def __init__(self, poles=None, coeffs=None):
        if (poles is None) == (coeffs is None):
            raise ValueError("give exactly one of poles or coeffs")
        if poles is not None:
            poles = np.atleast_1d(np.asarray(poles, dtype=complex))
            # validates conjugate closure eagerly
            self._coeffs = poly_from_roots(poles)
            self._poles = poles.copy()
        else:
            if not isinstance(coeffs, RealPoly):
                coeffs = RealPoly(coeffs)
            self._coeffs = coeffs.monic()
            self._poles = None

    @classmethod
    def from_poles(cls, poles) -> "DesiredSpectrum":
        return cls(poles=poles)

    @classmethod
    def from_coeffs(cls, coeffs) -> "DesiredSpectrum":
        return cls(coeffs=coeffs)

    @property
    def size(self) -> int:
        return self._coeffs.degree

    @property
    def poles(self) -> np.ndarray:
        if self._poles is not None:
            return self._poles.copy()
        return roots_of(self._coeffs)

    @property
    def coeffs(self) -> RealPoly:
        return self._coeffs

    def _monic_xp(self) -> np.ndarray:
        """Ascending monic coefficients in longdouble."""
        if self._poles is not None:
            return _xprec.poly_from_roots_xp(self._poles)
        return self._coeffs.coeffs.astype(LD)


class SynthesisReport:
    """Result of a gain synthesis: gains plus the factorization used."""

    __slots__ = ("gains", "nominal_poly", "controller_factor",
                 "observer_factor", "split_policy_used")

    def __init__(self, gains, nominal_poly, controller_factor,
                 observer_factor, split_policy_used):
        self.gains = gains
        self.nominal_poly = nominal_poly
        self.controller_factor = controller_factor
        self.observer_factor = observer_factor
        self.split_policy_used = split_policy_used


class ConjectureReport:
    """Outcome of a randomized eigenvalue-assignment verification run."""

    __slots__ = ("rho", "trials", "seed", "tolerance", "residuals",
                 "failures", "max_residual", "passed")

    def __init__(self, rho, trials, seed, tolerance, residuals):
        self.rho = int(rho)
        self.trials = int(trials)
        self.seed = int(seed)
        self.tolerance = float(tolerance)
        self.residuals = np.asarray(residuals, dtype=float)
        self.failures = [int(i) for i in
                         np.flatnonzero(self.residuals >= self.tolerance)]
        self.max_residual = float(self.residuals.max()) if trials else 0.0
        self.passed = not self.failures

    def __repr__(self):
        return (f"ConjectureReport(rho={self.rho}, trials={self.trials}, "
                f"seed={self.seed}, max_residual={self.max_residual:.3e}, "
                f"passed={self.passed})")


def _gain_vectors(gains) -> tuple[np.ndarray, np.ndarray]:
    K = np.atleast_1d(np.asarray(gains.K, dtype=float))
    G = np.atleast_1d(np.asarray(gains.G, dtype=float))
    if G.size != K.size + 1:
        raise ValueError("G must have exactly one more entry than K")
    return K, G


def nominal_coeffs(gains) -> RealPoly:
    """Non-leading coefficients of the nominal characteristic polynomial.

    For order 3 this evaluates the seven closed-form expressions; in
    general the nominal polynomial is the product of the controller
    factor s^rho + k_rho s^(rho-1) + ... + k_1 and the observer factor
    s^(rho+1) + g_1 s^rho + ... + g_(rho+1), and the two agree.
    Returned ascending: [qh_0, ..., qh_(2 rho)].
    """
    K, G = _gain_vectors(gains)
    if K.size == 3:
        k1, k2, k3 = K
        g1, g2, g3, g4 = G
        return RealPoly([
            g4 * k1,
            g3 * k1 + g4 * k2,
            g2 * k1 + g3 * k2 + g4 * k3,
            g4 + g1 * k1 + g2 * k2 + g3 * k3,
            g3 + k1 + g1 * k2 + g2 * k3,
            g2 + k2 + g1 * k3,
            g1 + k3,
        ])
    ctrl = np.concatenate([K, [1.0]])
    obs = np.concatenate([G[::-1], [1.0]])
    return RealPoly(np.convolve(ctrl, obs)[:-1])


def transform_desired(q_star, plant: CanonicalPlant, b_hat: float) -> RealPoly:
    """Desired-to-nominal coefficient transform, as a monic polynomial.

    At order 3 the transform is the closed-form back-substitution; at
    other orders the affine map between the two coefficient vectors is
    identified numerically by probing the closed loop at unit gain
    settings, then inverted.  With a = 0 and b_hat = b the transform is
    the identity.
    """
    b_hat = float(b_hat)
    if b_hat == 0.0:
        raise ValueError("b_hat must be nonzero")
    if plant.b == 0.0:
        raise ValueError("plant input coefficient must be nonzero")
    q = _as_spectrum(q_star, plant.rho)
    qhat = _xprec.transform_desired_xp(plant.a, plant.b, b_hat, q._monic_xp())
    return RealPoly(qhat.astype(float))


def _as_spectrum(desired, rho: int) -> DesiredSpectrum:
    if isinstance(desired, RealPoly):
        desired = DesiredSpectrum.from_coeffs(desired.coeffs)
    elif not isinstance(desired, DesiredSpectrum):
        desired = DesiredSpectrum.from_poles(desired)
    if desired.size != 2 * rho + 1:
        raise ValueError(
            f"desired spectrum must have {2 * rho + 1} poles for order {rho}"
        )
    return desired


def gains_from_nominal(q_hat_star, rho: int, b_hat: float,
                       policy=SLOWEST_TO_CONTROLLER) -> SynthesisReport:
    """Factor a monic nominal polynomial into gains.

    The roots are split conjugate-atomically into a controller set of
    size rho and an observer set of size rho+1 by ``policy``; K and G
    are the non-leading coefficients of the rebuilt factors.
    """
    if not isinstance(q_hat_star, RealPoly):
        q_hat_star = RealPoly(q_hat_star)
    coeffs = q_hat_star.coeffs
    if coeffs.size != 2 * rho + 2:
        raise ValueError(f"nominal polynomial must have degree {2 * rho + 1}")
    if abs(coeffs[-1] - 1.0) > 1e-12:
        raise ValueError("nominal polynomial must be monic")
    qhat_ld = coeffs.astype(LD)
    qhat_ld[-1] = 1
    K, G, ctrl, obs = _xprec.extract_gains_xp(qhat_ld, rho, policy)
    gains = AdrcGains(K.astype(float), G.astype(float), b_hat)
    return SynthesisReport(
        gains=gains,
        nominal_poly=RealPoly(coeffs),
        controller_factor=RealPoly(ctrl.astype(float)),
        observer_factor=RealPoly(obs.astype(float)),
        split_policy_used=policy,
    )


def synthesize(plant: CanonicalPlant, b_hat, desired,
               policy=SLOWEST_TO_CONTROLLER) -> SynthesisReport:
    """Gains placing the closed-loop spectrum at the desired poles.

    Pipeline: transform the desired coefficients to nominal ones, factor
    and split, then polish (K, G) against the realized characteristic
    polynomial.  ``b_hat=None`` defaults to sign(b).  The whole pipeline
    runs in extended precision and rounds once at the end.
    """
    if b_hat is None:
        b_hat = math.copysign(1.0, plant.b)
    b_hat = float(b_hat)
    if b_hat == 0.0:
        raise ValueError("b_hat must be nonzero")
    desired = _as_spectrum(desired, plant.rho)
    rho = plant.rho
    q_ld = desired._monic_xp()
    qhat_ld = _xprec.transform_desired_xp(plant.a, plant.b, b_hat, q_ld)
    K_ld, G_ld, ctrl, obs = _xprec.extract_gains_xp(qhat_ld, rho, policy)
    K, G, _ = _xprec.newton_vs_q(plant.a, plant.b, b_hat, K_ld, G_ld,
                                 q_ld[:2 * rho + 1])
    gains = AdrcGains(K, G, b_hat)
    return SynthesisReport(
        gains=gains,
        nominal_poly=RealPoly(qhat_ld.astype(float)),
        controller_factor=RealPoly(ctrl.astype(float)),
        observer_factor=RealPoly(obs.astype(float)),
        split_policy_used=policy,
    )


def bandwidth_gains(omega_c: float, omega_o: float,
                    rho: int) -> tuple[np.ndarray, np.ndarray]:
    """Gains placing all controller poles at -omega_c, observer at -omega_o.

    K holds the non-leading ascending coefficients of (s + omega_c)^rho;
    G holds those of (s + omega_o)^(rho+1) in the observer ordering
    g_i = C(rho+1, i) omega_o^i.
    """
    omega_c = float(omega_c)
    omega_o = float(omega_o)
    if omega_c <= 0.0 or omega_o <= 0.0:
        raise ValueError("bandwidths must be positive")
    rho = int(rho)
    if rho < 1:
        raise ValueError("rho must be at least 1")
    K = np.array([math.comb(rho, j) * omega_c ** (rho - j)
                  for j in range(rho)])
    G = np.array([math.comb(rho + 1, i) * omega_o ** i
                  for i in range(1, rho + 2)])
    return K, G


def high_gain_gains(alpha, epsilon: float) -> np.ndarray:
    """Observer gains g_i = alpha_i / epsilon^i.

    The alpha vector must make the associated companion matrix (alpha
    down the first column, identity superdiagonal) Hurwitz; shrinking
    epsilon then scales the observer spectrum without changing its
    shape.  The bandwidth parameterization is the special case where
    the companion spectrum is all at -1 and epsilon = 1/omega_o.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    epsilon = float(epsilon)
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    m = alpha.size
    comp = np.zeros((m, m))
    comp[:, 0] = -alpha
    for i in range(m - 1):
        comp[i, i + 1] = 1.0
    lams = np.linalg.eigvals(comp)
    if np.any(lams.real >= 0.0):
        bad = lams[lams.real >= 0.0]
        raise NotHurwitz(
            f"companion matrix has eigenvalues with nonnegative real part: "
            f"{bad}", lams)
    return alpha / epsilon ** np.arange(1, m + 1)


def _sample_poles(rng, rho: int, min_sep: float = 0.4) -> np.ndarray:
    """Stable conjugate-closed spectrum with pairwise-separated poles.

    Real parts uniform in [-6, -0.5]; imaginary parts of complex pairs
    uniform in [0.5, 2].  Resamples until every pair of poles is at
    least min_sep apart, so the verification below measures transform
    accuracy rather than root-cluster conditioning.
    """
    n = 2 * rho + 1
    for _ in range(200):
        npairs = int(rng.integers(0, rho + 1))
        nreal = n - 2 * npairs
        re = rng.uniform(-6.0, -0.5, npairs + nreal)
        im = rng.uniform(0.5, 2.0, npairs)
        poles = [complex(r, 0.0) for r in re[:nreal]]
        for r, i in zip(re[nreal:], im):
            poles += [complex(r, i), complex(r, -i)]
        poles = np.array(poles)
        dist = np.abs(poles[:, None] - poles[None, :]) + np.eye(n) * 1e9
        if dist.min() >= min_sep:
            return poles
    raise RuntimeError("pole sampling failed to separate after 200 draws")


def _conjecture_trial(args) -> float:
    rho, seed, t = args
    rng = np.random.default_rng([seed, t])
    a = rng.uniform(-5.0, 5.0, rho)
    b = float(rng.uniform(0.5, 5.0) * rng.choice([-1.0, 1.0]))
    b_hat = float(rng.uniform(0.5, 5.0) * rng.choice([-1.0, 1.0]))
    poles = _sample_poles(rng, rho)
    plant = CanonicalPlant(a, b)
    report = synthesize(plant, b_hat, DesiredSpectrum.from_poles(poles))
    cl = build_closed_loop(plant, report.gains)
    return _xprec.pole_residual(cl.A_cl, poles)


def verify_conjecture(rho: int, trials: int, seed: int,
                      jobs: int = 1, tolerance: float = 1e-5) -> ConjectureReport:
    """Randomized check that eigenvalue assignment succeeds at order rho.

    Each trial draws a in [-5,5]^rho, b and b_hat in +/-[0.5,5], and a
    stable separated spectrum with real parts in [-6,-0.5], synthesizes
    gains, and measures the worst realized-vs-requested pole distance.
    Trials are seeded independently (seed, trial index), so results do
    not depend on execution order or parallelism.  Failures are reported,
    never suppressed.
    """
    rho = int(rho)
    if not 1 <= rho <= 8:
        raise ValueError("rho must be between 1 and 8")
    trials = int(trials)
    if trials < 0:
        raise ValueError("trials must be non-negative")
    args = [(rho, int(seed), t) for t in range(trials)]
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            residuals = list(pool.map(_conjecture_trial, args, chunksize=8))
    else:
        residuals = [_conjecture_trial(a) for a in args]
    return ConjectureReport(rho, trials, seed, tolerance, residuals)
