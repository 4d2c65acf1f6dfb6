"""Independent reference computations for the test suite.

Two oracles live here:

* a 30+ digit ascending-series evaluation of the Bessel functions built on
  mpmath arithmetic (terms summed explicitly, not mpmath's own bessel
  routines), used to pin the special-function accuracy;
* nested tanh-sinh quadrature with step-halving convergence control for
  the boundary-integral double integrals.  The double-exponential map
  handles the endpoint/log singularities of those integrands without any
  knowledge of the production rule layout, so the two routes are fully
  independent.
"""

from __future__ import annotations

import numpy as np
import mpmath as mp


# ----------------------------------------------------------------------
# high-precision Bessel series
# ----------------------------------------------------------------------

def bessel_series(order: int, x: float, digits: int = 30):
    """(J_order(x), Y_order(x)) summed from the ascending series in mpmath
    arithmetic with enough guard digits for the cancellation at large x."""
    if order not in (0, 1):
        raise ValueError("orders 0 and 1 only")
    guard = int(0.9 * x) + 15
    with mp.workdps(digits + guard):
        z = mp.mpf(x) ** 2 / 4
        if order == 0:
            term = mp.mpf(1)
            j = mp.mpf(1)
            ysum = mp.mpf(0)
            harm = mp.mpf(0)
            m = 1
            while True:
                term = -term * z / (m * m)
                harm += mp.mpf(1) / m
                j += term
                ysum -= harm * term
                if abs(term) < mp.mpf(10) ** (-(digits + guard)):
                    break
                m += 1
            y = 2 / mp.pi * ((mp.log(mp.mpf(x) / 2) + mp.euler) * j + ysum)
        else:
            term = mp.mpf(1)
            s = mp.mpf(1)
            ysum = mp.mpf(1)
            harm = mp.mpf(0)
            m = 1
            while True:
                term = -term * z / (m * (m + 1))
                harm += mp.mpf(1) / m
                s += term
                ysum += term * (2 * harm + mp.mpf(1) / (m + 1))
                if abs(term) < mp.mpf(10) ** (-(digits + guard)):
                    break
                m += 1
            j = mp.mpf(x) / 2 * s
            y = (
                2 / mp.pi * ((mp.log(mp.mpf(x) / 2) + mp.euler) * j - x / 4 * ysum)
                - 2 / (mp.pi * mp.mpf(x))
            )
        return mp.mpf(j), mp.mpf(y)


# ----------------------------------------------------------------------
# tanh-sinh quadrature with doubling
# ----------------------------------------------------------------------

def _tanh_sinh_nodes(n: int, tmax: float = 3.8):
    t = np.linspace(-tmax, tmax, 2 * n + 1)
    h = t[1] - t[0]
    st = 0.5 * np.pi * np.sinh(t)
    x = np.tanh(st)
    w = h * 0.5 * np.pi * np.cosh(t) / np.cosh(st) ** 2
    keep = 1.0 - np.abs(x) > 1e-17
    return x[keep], w[keep]


def ts_quad_vec(f, a: float, b: float, tol: float = 1e-13, n0: int = 40,
                max_doublings: int = 6):
    """Integrate a vector-valued f over [a, b] by tanh-sinh doubling.

    f maps an array of m points to an array (m, ...) of values; doubling
    stops when two successive levels agree to tol (absolute, per entry)."""
    prev = None
    n = n0
    for _ in range(max_doublings):
        x, w = _tanh_sinh_nodes(n)
        pts = 0.5 * (a + b) + 0.5 * (b - a) * x
        vals = f(pts)
        cur = np.tensordot(w, vals, axes=(0, 0)) * 0.5 * (b - a)
        if prev is not None and np.all(np.abs(cur - prev) <= tol):
            return cur
        prev = cur
        n *= 2
    return cur


def bem_block_oracle(bm, p: int, r: int, kappa: float, k: int,
                     kind: str = "V", tol: float = 1e-12):
    """Reference (k+1)x(k+1) Galerkin block of the single- or double-layer
    operator for outer panel p against inner panel r.

    Both integrals go through tanh-sinh doubling; the inner interval is
    split at the closest-approach parameter when the panels coincide."""
    from cvembem.bem import _lagrange_at, _trace_nodes
    from cvembem.specfun import hankel1

    nodes = _trace_nodes(k)

    def kernel(x, y, ny):
        d = x - y
        dist = np.maximum(np.hypot(d[..., 0], d[..., 1]), 1e-280)
        if kind == "V":
            if kappa == 0.0:
                return -np.log(dist) / (2 * np.pi)
            return 0.25j * hankel1(0, kappa * dist)
        rn = d[..., 0] * ny[..., 0] + d[..., 1] * ny[..., 1]
        if kappa == 0.0:
            return rn / (2 * np.pi * dist**2)
        return 0.25j * kappa * (rn / dist) * hankel1(1, kappa * dist)

    def inner_vec(theta):
        """Inner integrals against every inner basis function for a batch
        of outer parameters; returns (m, k+1)."""
        xs = bm.evals[p](theta)
        out = np.empty((len(theta), k + 1), dtype=complex)
        for mth, (th, xpt) in enumerate(zip(theta, xs)):
            def f(sig, xpt=xpt):
                y = bm.evals[r](sig)
                tg = bm.derivs[r](sig)
                speed = np.hypot(tg[:, 0], tg[:, 1])
                ny = np.stack([tg[:, 1], -tg[:, 0]], 1) / speed[:, None]
                kern = kernel(xpt[None, :], y, ny)
                return kern[:, None] * _lagrange_at(nodes, sig).T * speed[:, None]

            if p == r and 1e-12 < th < 1 - 1e-12:
                out[mth] = ts_quad_vec(f, 0.0, th, tol) + ts_quad_vec(f, th, 1.0, tol)
            else:
                out[mth] = ts_quad_vec(f, 0.0, 1.0, tol)
        return out

    def outer_vec(theta):
        inner = inner_vec(theta)
        tg = bm.derivs[p](theta)
        speed = np.hypot(tg[:, 0], tg[:, 1])
        basis = _lagrange_at(nodes, theta)  # (k+1, m)
        return basis.T[:, :, None] * inner[:, None, :] * speed[:, None, None]

    return ts_quad_vec(outer_vec, 0.0, 1.0, tol)
