"""State-space plants and conversion to the integrator-chain canonical form.

A SISO plant (A, B, C) whose relative degree equals its order N admits
coordinates in which the state is (y, y', ..., y^(N-1)) and the dynamics
are a chain of integrators closed by

    y^(N) = a1*y + a2*y' + ... + aN*y^(N-1) + b*u + d(t),

where d(t) collects every additive state disturbance and its derivatives.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NoRelativeDegree",
    "Unobservable",
    "RelativeDegreeMismatch",
    "StateSpacePlant",
    "CanonicalPlant",
    "DisturbanceComposition",
    "relative_degree",
    "to_canonical",
]


class NoRelativeDegree(ValueError):
    """Every Markov parameter up to the plant order is numerically zero."""


class Unobservable(ValueError):
    """The observability matrix is too ill-conditioned to invert."""


class RelativeDegreeMismatch(ValueError):
    """The plant's relative degree differs from its order."""


def _as_vector(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 2 and 1 in v.shape:
        v = v.reshape(-1)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v.copy()


class StateSpacePlant:
    """SISO linear time-invariant plant (A, B, C)."""

    __slots__ = ("A", "B", "C")

    def __init__(self, A, B, C):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise ValueError("A must be a non-empty square matrix")
        if not np.all(np.isfinite(A)):
            raise ValueError("A must be finite")
        self.A = A.copy()
        self.B = _as_vector(B, "B")
        self.C = _as_vector(C, "C")
        n = A.shape[0]
        if self.B.size != n or self.C.size != n:
            raise ValueError("A, B, C dimensions are inconsistent")

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def __repr__(self):
        return (f"StateSpacePlant(A={self.A.tolist()!r}, "
                f"B={self.B.tolist()!r}, C={self.C.tolist()!r})")


class CanonicalPlant:
    """Integrator-chain plant (a, b) with y^(rho) = a.x + b u + d."""

    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a = _as_vector(a, "a")
        b = float(b)
        if b == 0.0 or not np.isfinite(b):
            raise ValueError("input coefficient b must be nonzero and finite")
        self.b = b

    @property
    def rho(self) -> int:
        return self.a.size

    def to_state_space(self) -> StateSpacePlant:
        """Canonical triple: chain of integrators, feedback in the last row."""
        rho = self.rho
        A = np.zeros((rho, rho))
        for i in range(rho - 1):
            A[i, i + 1] = 1.0
        A[rho - 1, :] = self.a
        B = np.zeros(rho)
        B[rho - 1] = self.b
        C = np.zeros(rho)
        C[0] = 1.0
        return StateSpacePlant(A, B, C)

    def __repr__(self):
        return f"CanonicalPlant(a={self.a.tolist()!r}, b={self.b!r})"


class DisturbanceComposition:
    """Rows mapping an additive state disturbance into the scalar d(t).

    For a disturbance delta(t) entering as z' = Az + Bu + delta, the
    canonical-form disturbance is d = sum_j rows[j] . delta^(j).  The
    last row equals C exactly.
    """

    __slots__ = ("rows",)

    def __init__(self, rows):
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-D array")
        self.rows = rows.copy()

    def _row(self, j: int) -> np.ndarray:
        if j >= self.rows.shape[0]:
            raise AttributeError(f"w{j} is undefined for order "
                                 f"{self.rows.shape[0]}")
        return self.rows[j]

    @property
    def w0(self) -> np.ndarray:
        return self._row(0)

    @property
    def w1(self) -> np.ndarray:
        return self._row(1)

    @property
    def w2(self) -> np.ndarray:
        return self._row(2)


def relative_degree(p: StateSpacePlant, *, markov_tol: float = 1e-10) -> int:
    """Smallest k with C A^(k-1) B significantly nonzero, up to the order."""
    n = p.order
    norm_a = np.linalg.norm(p.A, 2)
    scale0 = np.linalg.norm(p.C) * np.linalg.norm(p.B)
    row = p.C.copy()
    for k in range(1, n + 1):
        scale = scale0 * max(1.0, norm_a) ** (k - 1)
        if abs(row @ p.B) > markov_tol * scale:
            return k
        row = row @ p.A
    raise NoRelativeDegree(
        f"all Markov parameters up to order {n} are numerically zero"
    )


def to_canonical(
    p: StateSpacePlant,
    *,
    cond_limit: float = 1e12,
    markov_tol: float = 1e-10,
) -> tuple[CanonicalPlant, DisturbanceComposition]:
    """Canonical parameters (a, b) and the disturbance-composition rows.

    Requires the plant to be observable (observability matrix condition
    number below ``cond_limit``) and to have relative degree equal to its
    order.  The observability system is solved directly rather than by
    forming an explicit inverse.
    """
    n = p.order
    # powers[k] = C A^k as a row, k = 0..n
    powers = np.empty((n + 1, n))
    powers[0] = p.C
    for k in range(1, n + 1):
        powers[k] = powers[k - 1] @ p.A
    obs = powers[:n]
    if np.linalg.cond(obs) >= cond_limit:
        raise Unobservable(
            f"observability matrix condition number exceeds {cond_limit:g}"
        )
    rho = relative_degree(p, markov_tol=markov_tol)
    if rho != n:
        raise RelativeDegreeMismatch(
            f"relative degree {rho} differs from plant order {n}"
        )
    # a solves a . obs = C A^n, i.e. obs^T a^T = (C A^n)^T
    a = np.linalg.solve(obs.T, powers[n])
    b = float(powers[n - 1] @ p.B)
    rows = np.empty((n, n))
    for j in range(n):
        # stack j+1 zero rows, then C, CA, ..., C A^(n-2-j)
        s = np.zeros((n, n))
        for i in range(j + 1, n):
            s[i] = powers[i - j - 1]
        rows[j] = powers[n - 1 - j] - a @ s
    rows[n - 1] = p.C
    return CanonicalPlant(a, b), DisturbanceComposition(rows)
