"""Pure-NumPy fallback for the hot stepping kernels.

Semantically identical to the compiled extension `_fastkern`; selected by
`roughspde.kernels` when the extension is unavailable (or forced via
ROUGHSPDE_FORCE_SLOW=1). Per-slab updates are vectorized over modes, so the
only Python-level cost is the loop over time slabs.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

BACKEND = "python"


def heat_chain(u0, decay, gain, forcing):
    """Propagate u through all slabs of `forcing`: u <- u * decay + forcing[i] * gain."""
    u = np.array(u0, dtype=float, copy=True)
    for row in forcing:
        u *= decay
        u += row * gain
    return u


def wave_chain(u0, v0, cos_k, sinc_k, msin_k, gain_u, gain_v, forcing):
    """Rotate (u, v) through all slabs with per-slab-constant forcing.

    u <- cos u + sinc v + f gain_u,  v <- msin u + cos v + f gain_v,
    with cos = cos(rt k), sinc = sin(rt k)/rt, msin = -rt sin(rt k).
    """
    u = np.array(u0, dtype=float, copy=True)
    v = np.array(v0, dtype=float, copy=True)
    for row in forcing:
        un = cos_k * u + sinc_k * v + row * gain_u
        v = msin_k * u + cos_k * v + row * gain_v
        u = un
    return u, v


class FemStepper:
    """Semi-implicit Euler stepper for M u' + A u = load: (M + delta A) u+ = M u + delta load.

    Built from the tridiagonal matrices' main/off diagonals; the system matrix
    is factorized once (banded Cholesky here, Thomas factorization in the
    compiled twin).
    """

    def __init__(self, mass_main, mass_off, sys_main, sys_off, delta):
        self.mass_main = np.asarray(mass_main, dtype=float)
        self.mass_off = np.asarray(mass_off, dtype=float)
        self.delta = float(delta)
        nn = self.mass_main.shape[0]
        ab = np.zeros((2, nn))
        ab[0, 1:] = sys_off
        ab[1, :] = sys_main
        self._cb = cholesky_banded(ab)

    def _mass_mv(self, u):
        r = self.mass_main * u
        r[1:] += self.mass_off * u[:-1]
        r[:-1] += self.mass_off * u[1:]
        return r

    def step(self, u, load):
        """One substep: returns (M + delta A)^{-1} (M u + delta load)."""
        rhs = self._mass_mv(u) + self.delta * load
        return cho_solve_banded((self._cb, False), rhs)

    def chain(self, u0, loads, substeps):
        """All slabs, `substeps` substeps each, load held constant within a slab."""
        u = np.array(u0, dtype=float, copy=True)
        for load in loads:
            for _ in range(substeps):
                u = self.step(u, load)
        return u
