# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner kernel: batched perspective-function prox.

Same contract as boxot.prox.perspective_prox_numpy; per-element safeguarded
Newton on the optimality cubic, monotone from the upper bracket end.
"""


def prox_pairs(const double[::1] jbar, const double[::1] rbar, double gamma,
               double[::1] jout, double[::1] rout):
    cdef Py_ssize_t i, n = jbar.shape[0]
    cdef double jb, rb, target, lo, x, xg, p, dp, dx
    cdef int it
    if jout.shape[0] != n or rout.shape[0] != n or rbar.shape[0] != n:
        raise ValueError("array length mismatch")
    if gamma <= 0.0:
        raise ValueError("prox step must be positive")
    for i in range(n):
        jb = jbar[i]
        rb = rbar[i]
        if jb <= 0.0:
            jout[i] = 0.0
            rout[i] = rb if rb > 0.0 else 0.0
            continue
        if rb <= -jb * jb / (2.0 * gamma):
            jout[i] = 0.0
            rout[i] = 0.0
            continue
        target = 0.5 * gamma * jb * jb
        lo = rb if rb > 0.0 else 0.0
        xg = lo + gamma
        x = lo + target / (xg * xg)
        for it in range(100):
            xg = x + gamma
            p = (x - rb) * xg * xg - target
            dp = xg * xg + 2.0 * (x - rb) * xg
            dx = p / dp
            x -= dx
            if x < lo:
                x = lo
            if dx <= 1e-16 * (x + gamma) and dx >= -1e-16 * (x + gamma):
                break
        rout[i] = x
        jout[i] = jb * x / (x + gamma)
