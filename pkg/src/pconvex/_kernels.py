"""Compiled inner loops for polynomial evaluation and ball ascent."""

import numpy as np
from numba import njit


@njit(cache=True)
def _powers(z, deg):
    k = z.shape[0]
    pw = np.empty((k, deg + 1))
    for i in range(k):
        pw[i, 0] = 1.0
        for j in range(1, deg + 1):
            pw[i, j] = pw[i, j - 1] * z[i]
    return pw


@njit(cache=True)
def poly_values(exps, coef, deg, pts):
    n = pts.shape[0]
    m, k = exps.shape
    out = np.empty(n)
    for p in range(n):
        pw = _powers(pts[p], deg)
        acc = 0.0
        for t in range(m):
            mono = coef[t]
            for i in range(k):
                mono *= pw[i, exps[t, i]]
            acc += mono
        out[p] = acc
    return out


@njit(cache=True)
def _value_grad(exps, coef, deg, z, grad):
    m, k = exps.shape
    pw = _powers(z, deg)
    pre = np.empty(k)
    val = 0.0
    for i in range(k):
        grad[i] = 0.0
    for t in range(m):
        acc = 1.0
        for i in range(k):
            pre[i] = acc
            acc *= pw[i, exps[t, i]]
        val += coef[t] * acc
        # gradient via prefix and suffix products
        suf = coef[t]
        for i in range(k - 1, -1, -1):
            a = exps[t, i]
            if a > 0:
                grad[i] += a * pw[i, a - 1] * pre[i] * suf
            suf *= pw[i, a]
    return val


@njit(cache=True)
def ascend(exps, coef, deg, starts, iters, tol):
    """Projected normalized-gradient ascent of |p| on the unit ball from each start.

    On the boundary sphere an outward direction is replaced by its tangential
    part.  A step is kept only when |p| strictly increases (step doubles),
    otherwise the step is quartered.  Returns the best value and its point.
    """
    n, k = starts.shape
    best_val = -1.0
    best_z = np.zeros(k)
    z = np.empty(k)
    trial = np.empty(k)
    g = np.empty(k)
    tg = np.empty(k)
    d = np.empty(k)
    for s in range(n):
        for i in range(k):
            z[i] = starts[s, i]
        v = _value_grad(exps, coef, deg, z, g)
        step = 0.05
        for _ in range(iters):
            if step <= tol:
                break
            gn = 0.0
            for i in range(k):
                gn += g[i] * g[i]
            gn = np.sqrt(gn)
            if gn == 0.0:
                break
            sgn = 1.0 if v >= 0 else -1.0
            for i in range(k):
                d[i] = sgn * g[i] / gn
            # on the sphere with an outward ascent direction, move tangentially
            zz = 0.0
            dz = 0.0
            for i in range(k):
                zz += z[i] * z[i]
                dz += d[i] * z[i]
            if zz >= 1.0 - 1e-12 and dz > 0.0:
                dn = 0.0
                for i in range(k):
                    d[i] -= dz * z[i] / zz
                    dn += d[i] * d[i]
                dn = np.sqrt(dn)
                if dn <= 1e-14:
                    break
                for i in range(k):
                    d[i] /= dn
            r2 = 0.0
            for i in range(k):
                trial[i] = z[i] + step * d[i]
                r2 += trial[i] * trial[i]
            if r2 > 1.0:
                r = np.sqrt(r2)
                for i in range(k):
                    trial[i] /= r
            tv = _value_grad(exps, coef, deg, trial, tg)
            if abs(tv) > abs(v):
                v = tv
                for i in range(k):
                    z[i] = trial[i]
                    g[i] = tg[i]
                step *= 2.0
            else:
                step *= 0.25
        if abs(v) > best_val:
            best_val = abs(v)
            for i in range(k):
                best_z[i] = z[i]
    return best_val, best_z
