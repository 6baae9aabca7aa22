"""Real polynomials, characteristic polynomials, and spectrum utilities.

Polynomials are stored as ascending real coefficient arrays, so
``p(s) = c[0] + c[1] s + ... + c[d] s**d``.  Root sets are kept in a
canonical order (ascending real part, then ascending imaginary part) so
that index-based selections are reproducible.
"""

from __future__ import annotations

import itertools

import numpy as np

__all__ = [
    "ConjugateViolation",
    "Degenerate",
    "InfeasibleSplit",
    "SLOWEST_TO_CONTROLLER",
    "FASTEST_TO_CONTROLLER",
    "RealPoly",
    "poly_from_roots",
    "roots_of",
    "char_poly",
    "eig",
    "real_split",
]


class ConjugateViolation(ValueError):
    """A root multiset is not closed under complex conjugation."""


class Degenerate(ArithmeticError):
    """Independent eigenvalue computations disagree beyond tolerance."""


class InfeasibleSplit(ValueError):
    """No conjugate-closed partition of the requested sizes exists."""


SLOWEST_TO_CONTROLLER = "slowest"
FASTEST_TO_CONTROLLER = "fastest"

# |imag| below this (relative) threshold is treated as a real root.
_REAL_SNAP = 1e-9

_CHAR_POLY_MAX_DIM = 32


class RealPoly:
    """Immutable real polynomial with ascending coefficients."""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        # strip exact trailing zeros but keep at least one coefficient
        last = c.size
        while last > 1 and c[last - 1] == 0.0:
            last -= 1
        self._coeffs = c[:last].copy()
        self._coeffs.flags.writeable = False

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def degree(self) -> int:
        return self._coeffs.size - 1

    def __call__(self, s):
        return np.polynomial.polynomial.polyval(s, self._coeffs)

    def __mul__(self, other):
        if isinstance(other, RealPoly):
            return RealPoly(np.convolve(self._coeffs, other._coeffs))
        if np.isscalar(other):
            return RealPoly(self._coeffs * float(other))
        return NotImplemented

    __rmul__ = __mul__

    def monic(self) -> "RealPoly":
        lead = self._coeffs[-1]
        if lead == 0.0:
            raise ValueError("zero polynomial has no monic form")
        return RealPoly(self._coeffs / lead)

    def __eq__(self, other):
        if not isinstance(other, RealPoly):
            return NotImplemented
        return self._coeffs.shape == other._coeffs.shape and bool(
            np.all(self._coeffs == other._coeffs)
        )

    def __hash__(self):
        return hash(self._coeffs.tobytes())

    def __repr__(self):
        return f"RealPoly({self._coeffs.tolist()!r})"


def _canonical_order(roots: np.ndarray) -> np.ndarray:
    """Sort ascending by real part, ties broken by imaginary part."""
    roots = np.asarray(roots, dtype=complex)
    order = np.lexsort((roots.imag, roots.real))
    return roots[order]


def _snap_and_pair(roots: np.ndarray):
    """Classify roots into real singles and conjugate pairs.

    Returns (atoms, values) where each atom is a tuple of indices into
    the canonically ordered ``values`` array.  Raises ConjugateViolation
    if the multiset is not conjugate-closed.
    """
    vals = _canonical_order(roots).copy()
    tol = _REAL_SNAP * (1.0 + np.abs(vals))
    real_mask = np.abs(vals.imag) <= tol
    vals[real_mask] = vals[real_mask].real
    atoms = [(int(i),) for i in np.flatnonzero(real_mask)]

    pending = [int(i) for i in np.flatnonzero(~real_mask)]
    used = set()
    for i in pending:
        if i in used:
            continue
        if vals[i].imag < 0:
            continue
        partner = None
        best = np.inf
        for j in pending:
            if j in used or j == i or vals[j].imag >= 0:
                continue
            d = abs(vals[j] - np.conj(vals[i]))
            if d < best:
                best = d
                partner = j
        if partner is None or best > _REAL_SNAP * (1.0 + abs(vals[i])):
            raise ConjugateViolation(
                f"root {vals[i]} has no conjugate partner in the set"
            )
        used.add(i)
        used.add(partner)
        # symmetrize the pair so the rebuilt quadratic is exactly real
        re = 0.5 * (vals[i].real + vals[partner].real)
        im = 0.5 * (vals[i].imag - vals[partner].imag)
        vals[i] = re + 1j * im
        vals[partner] = re - 1j * im
        atoms.append((min(i, partner), max(i, partner)))
    unmatched = [i for i in pending if i not in used]
    if unmatched:
        raise ConjugateViolation(
            f"roots {vals[unmatched]} have no conjugate partners in the set"
        )
    atoms.sort()
    return atoms, vals


def poly_from_roots(roots) -> RealPoly:
    """Monic real polynomial with the given conjugate-closed roots."""
    roots = np.atleast_1d(np.asarray(roots, dtype=complex))
    if roots.size == 0:
        return RealPoly([1.0])
    atoms, vals = _snap_and_pair(roots)
    coeffs = np.array([1.0])
    for atom in atoms:
        if len(atom) == 1:
            r = vals[atom[0]].real
            factor = np.array([-r, 1.0])
        else:
            r = vals[atom[0]]
            factor = np.array([abs(r) ** 2, -2.0 * r.real, 1.0])
        coeffs = np.convolve(coeffs, factor)
    return RealPoly(coeffs)


def roots_of(p) -> np.ndarray:
    """All roots of a polynomial, canonically ordered."""
    if isinstance(p, RealPoly):
        c = p.coeffs
    else:
        c = RealPoly(p).coeffs
    if c.size == 1:
        return np.array([], dtype=complex)
    return _canonical_order(np.roots(c[::-1]))


def char_poly(A) -> RealPoly:
    """Monic characteristic polynomial det(sI - A), ascending coefficients.

    Uses the Faddeev-LeVerrier recurrence, which is exact in rational
    arithmetic and dtype-generic.  Limited to dimension 32 because the
    recurrence loses accuracy rapidly beyond small dimensions.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    if n > _CHAR_POLY_MAX_DIM:
        raise ValueError(f"dimension {n} exceeds the supported limit "
                         f"{_CHAR_POLY_MAX_DIM}")
    # the trace recursion cancels badly in double precision on strongly
    # scaled matrices; extended precision restores ~3 digits
    coeffs = _char_poly_coeffs(A.astype(np.longdouble))
    return RealPoly(coeffs.astype(float))


def _char_poly_coeffs(A: np.ndarray) -> np.ndarray:
    """Faddeev-LeVerrier coefficients, generic over the input dtype."""
    n = A.shape[0]
    dtype = A.dtype
    c = np.zeros(n + 1, dtype=dtype)
    c[n] = 1
    M = np.eye(n, dtype=dtype)
    for k in range(1, n + 1):
        AM = A @ M
        c[n - k] = -np.trace(AM) / k
        M = AM + c[n - k] * np.eye(n, dtype=dtype)
    return c


def eig(A) -> np.ndarray:
    """Eigenvalues computed two independent ways with a consistency check.

    The primary path is a Schur-based eigensolver; the secondary path
    extracts roots of the characteristic polynomial.  If the two spectra
    disagree by more than 1e-6 (relative to the spectral magnitude) the
    matrix is reported as Degenerate rather than returning a silently
    unreliable answer.
    """
    A = np.asarray(A, dtype=float)
    primary = _canonical_order(np.linalg.eigvals(A))
    secondary = roots_of(char_poly(A))
    scale = 1.0 + (np.abs(primary).max() if primary.size else 0.0)
    mismatch = _matched_distance(primary, secondary)
    if mismatch > 1e-6 * scale:
        raise Degenerate(
            f"independent eigenvalue computations disagree by {mismatch:.3e}"
        )
    return primary


def _matched_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Max distance under the optimal pairing of two equal-size spectra."""
    from scipy.optimize import linear_sum_assignment

    if u.size == 0:
        return 0.0
    cost = np.abs(u[:, None] - v[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def real_split(roots, sizes, policy=SLOWEST_TO_CONTROLLER):
    """Partition a conjugate-closed root set into two conjugate-closed sets.

    ``sizes`` is (controller_size, observer_size); their sum must equal
    the number of roots.  Conjugate pairs are atomic: both members go to
    the same side.  ``policy`` selects among the feasible partitions:

    - "slowest": controller receives the subset maximizing the sum of
      real parts (the slowest dynamics), ties broken by the
      lexicographically smallest selection in canonical root order.
    - "fastest": controller receives the subset minimizing that sum.
    - an explicit sequence of indices into the canonically ordered root
      array, naming the controller subset.

    Returns (controller_roots, observer_roots), each canonically ordered.
    Raises InfeasibleSplit when no conjugate-closed partition of the
    requested sizes exists (or the explicit selection is not one).
    """
    roots = np.atleast_1d(np.asarray(roots, dtype=complex))
    m, n_obs = int(sizes[0]), int(sizes[1])
    if m < 0 or n_obs < 0 or m + n_obs != roots.size:
        raise ValueError("sizes must be non-negative and sum to len(roots)")
    atoms, vals = _snap_and_pair(roots)

    if not isinstance(policy, str):
        idx = sorted(int(i) for i in policy)
        if len(idx) != m or len(set(idx)) != m:
            raise InfeasibleSplit(
                f"explicit selection must name {m} distinct indices"
            )
        if any(i < 0 or i >= vals.size for i in idx):
            raise InfeasibleSplit("explicit selection index out of range")
        chosen = set(idx)
        for atom in atoms:
            hit = sum(1 for i in atom if i in chosen)
            if hit not in (0, len(atom)):
                raise InfeasibleSplit(
                    "explicit selection breaks a conjugate pair"
                )
        ctrl_idx = idx
    else:
        if policy not in (SLOWEST_TO_CONTROLLER, FASTEST_TO_CONTROLLER):
            raise ValueError(f"unknown split policy {policy!r}")
        best_key = None
        best_sel = None
        for r in range(len(atoms) + 1):
            for combo in itertools.combinations(range(len(atoms)), r):
                size = sum(len(atoms[i]) for i in combo)
                if size != m:
                    continue
                sel = tuple(sorted(j for i in combo for j in atoms[i]))
                real_sum = float(sum(vals[j].real for j in sel))
                score = -real_sum if policy == SLOWEST_TO_CONTROLLER else real_sum
                key = (score, sel)
                if best_key is None or key < best_key:
                    best_key = key
                    best_sel = sel
        if best_sel is None:
            raise InfeasibleSplit(
                f"no conjugate-closed partition with sizes ({m}, {n_obs})"
            )
        ctrl_idx = list(best_sel)

    ctrl_mask = np.zeros(vals.size, dtype=bool)
    ctrl_mask[ctrl_idx] = True
    return _canonical_order(vals[ctrl_mask]), _canonical_order(vals[~ctrl_mask])
