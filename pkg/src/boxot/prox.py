"""Proximal operator of the perspective function psi(J, rho) = J^2 / (2 rho).

psi is closed convex on {rho >= 0} with psi(0, 0) = 0 and psi(J, 0) = +inf
for J != 0; here it is additionally restricted to J >= 0 (backward flow is a
separate variable).  The prox with step gamma,

    argmin_{J >= 0, rho >= 0} psi(J, rho)
        + ((J - jbar)^2 + (rho - rbar)^2) / (2 gamma),

has a closed-form structure: for jbar <= 0 the flux is clamped to zero and
rho projects to max(rbar, 0); for rbar <= -jbar^2 / (2 gamma) the answer is
the apex (0, 0); otherwise rho is the unique positive root of the cubic

    (rho - rbar) (rho + gamma)^2 = gamma jbar^2 / 2

and J = jbar rho / (rho + gamma).  On [max(rbar, 0), inf) the cubic is
increasing and convex, so Newton from the upper bracket end converges
monotonically; a bracket clamp guards the first step.

The prox is positively homogeneous: prox at (lam*jbar, lam*rbar) with step
lam*gamma equals lam times the prox at (jbar, rbar) with step gamma.

A compiled kernel is preferred when the extension built; set the environment
variable BOXOT_DISABLE_EXTENSION=1 to force the NumPy fallback.
"""

from __future__ import annotations

import os

import numpy as np

_MAX_NEWTON = 100


def _cubic_roots_numpy(jb: np.ndarray, rb: np.ndarray, gamma: float) -> np.ndarray:
    """Positive root of (x - rb)(x + gamma)^2 = gamma jb^2 / 2, vectorized."""
    target = 0.5 * gamma * jb * jb
    lo = np.maximum(rb, 0.0)
    x = lo + target / ((lo + gamma) ** 2)
    for _ in range(_MAX_NEWTON):
        xg = x + gamma
        p = (x - rb) * xg * xg - target
        dp = xg * xg + 2.0 * (x - rb) * xg
        dx = p / dp
        x = np.maximum(x - dx, lo)
        if np.all(np.abs(dx) <= 1e-16 * (x + gamma)):
            break
    return x


def perspective_prox_numpy(jbar, rbar, gamma: float):
    """NumPy implementation of the perspective prox (elementwise on arrays)."""
    jb = np.asarray(jbar, dtype=float)
    rb = np.asarray(rbar, dtype=float)
    if gamma <= 0.0:
        raise ValueError("prox step must be positive")
    J = np.zeros_like(jb)
    rho = np.zeros_like(rb)

    clamp = jb <= 0.0
    rho[clamp] = np.maximum(rb[clamp], 0.0)

    rest = ~clamp
    apex = rest & (rb <= -jb * jb / (2.0 * gamma))
    solve = rest & ~apex
    if np.any(solve):
        x = _cubic_roots_numpy(jb[solve], rb[solve], gamma)
        rho[solve] = x
        J[solve] = jb[solve] * x / (x + gamma)
    return J, rho


try:
    if os.environ.get("BOXOT_DISABLE_EXTENSION"):
        raise ImportError("extension disabled via environment")
    from ._proxcore import prox_pairs as _prox_pairs_compiled

    HAVE_EXTENSION = True
except ImportError:
    _prox_pairs_compiled = None
    HAVE_EXTENSION = False


def perspective_prox(jbar, rbar, gamma: float):
    """Perspective prox; compiled kernel when available, NumPy otherwise."""
    if _prox_pairs_compiled is None:
        return perspective_prox_numpy(jbar, rbar, gamma)
    jb = np.ascontiguousarray(jbar, dtype=float)
    rb = np.ascontiguousarray(rbar, dtype=float)
    if gamma <= 0.0:
        raise ValueError("prox step must be positive")
    shape = jb.shape
    J = np.empty(jb.size)
    rho = np.empty(rb.size)
    _prox_pairs_compiled(jb.ravel(), rb.ravel(), float(gamma), J, rho)
    return J.reshape(shape), rho.reshape(shape)


def cubic_residual(jbar, rbar, gamma: float, rho) -> np.ndarray:
    """Scaled residual of the optimality cubic at the returned rho.

    Zero (to rounding) wherever the interior branch was taken; the clamp and
    apex branches are excluded by construction (residual reported as 0).
    """
    jb = np.asarray(jbar, dtype=float)
    rb = np.asarray(rbar, dtype=float)
    rho = np.asarray(rho, dtype=float)
    interior = (jb > 0.0) & (rb > -jb * jb / (2.0 * gamma))
    xg = rho + gamma
    p = (rho - rb) * xg * xg - 0.5 * gamma * jb * jb
    scale = (np.abs(rb) + np.abs(jb) + gamma + 1.0) ** 3
    return np.where(interior, np.abs(p) / scale, 0.0)
