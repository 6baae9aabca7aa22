"""Pure-Python integration backend.

For the affine system ds/dt = F s + g with constant g, the classical
RK4 step is exactly the degree-4 Taylor polynomial of the propagator,
so the step can be precomputed as one matrix M and one forcing weight
S; each step is then a single matrix-vector product.  This matches the
compiled stage-by-stage kernel to rounding error.
"""

from __future__ import annotations

import numpy as np

BLOWUP_LIMIT = 1e9


class Integrator:
    """Fixed-step RK4 propagator for ds/dt = F s + g, constant g."""

    def __init__(self, F, dt: float):
        F = np.ascontiguousarray(F, dtype=float)
        n = F.shape[0]
        eye = np.eye(n)
        A1 = dt * F
        self.M = eye + A1 @ (eye + A1 @ (eye / 2 + A1 @ (eye / 6 + A1 / 24)))
        self.S = (eye + A1 @ (eye / 2 + A1 @ (eye / 6 + A1 / 24))) * dt
        self.n = n

    def run(self, g, s, out, start: int, nsteps: int) -> int:
        """Advance nsteps, writing rows start+1..start+nsteps of out.

        Mutates s in place.  Returns -1, or the row index at which the
        state first exceeded the blowup limit (integration stops there).
        """
        M = self.M
        v = self.S @ np.asarray(g, dtype=float)
        for j in range(nsteps):
            s[:] = M @ s + v
            out[start + 1 + j] = s
            if np.abs(s).max() > BLOWUP_LIMIT:
                return start + 1 + j
        return -1
