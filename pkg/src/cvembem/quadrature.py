"""Quadrature rules: Gauss-Legendre/Lobatto, smoothed and graded 1D rules
for (nearly) singular boundary integrals, and tensor rules on curved
quadrilaterals via transfinite blending maps.

Gauss nodes are computed by Newton iteration on Legendre polynomials
(no table lookup), so all rules are deterministic and available for any
order in the supported range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Rule1D",
    "Rule2D",
    "gauss_legendre",
    "gauss_lobatto",
    "shifted",
    "qsmooth",
    "graded_rule",
    "BlendingPatch",
    "transfinite_map",
    "element_rule",
]

_NEWTON_TOL = 1e-15


@dataclass(frozen=True)
class Rule1D:
    """1D quadrature rule: strictly increasing nodes with positive weights."""

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float] = (-1.0, 1.0)


@dataclass(frozen=True)
class Rule2D:
    """Planar rule: physical points and weights (map Jacobian included)."""

    points: np.ndarray  # (m, 2)
    weights: np.ndarray  # (m,)


def _legendre_and_derivative(n: int, x: np.ndarray):
    """Values of P_n and P_n' by the three-term recurrence."""
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for m in range(2, n + 1):
        p_prev, p = p, ((2 * m - 1) * x * p - (m - 1) * p_prev) / m
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(n: int) -> Rule1D:
    """Classical n-point Gauss-Legendre rule on [-1, 1].

    Exact for polynomials of degree 2n - 1.
    """
    if not 1 <= n <= 64:
        raise ValueError(f"gauss_legendre order {n} outside [1, 64]")
    if n == 1:
        return Rule1D(np.array([0.0]), np.array([2.0]))
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    _, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return Rule1D(x[order], w[order])


def gauss_lobatto(n: int) -> Rule1D:
    """n-point Gauss-Lobatto rule on [-1, 1] including both endpoints.

    Exact for polynomials of degree 2n - 3.  Interior nodes are the roots
    of P'_{n-1}.
    """
    if n < 2:
        raise ValueError(f"gauss_lobatto needs n >= 2, got {n}")
    if n == 2:
        return Rule1D(np.array([-1.0, 1.0]), np.array([1.0, 1.0]))
    m = n - 1
    # Chebyshev-Lobatto points are good starting guesses for the P'_m roots.
    x = np.cos(np.pi * np.arange(1, m) / m)
    for _ in range(100):
        p, dp = _legendre_and_derivative(m, x)
        # P''_m from the Legendre ODE: (1-x^2) P'' = 2x P' - m(m+1) P.
        ddp = (2.0 * x * dp - m * (m + 1) * p) / (1.0 - x * x)
        dx = dp / ddp
        x -= dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    x = np.concatenate([[-1.0], np.sort(x), [1.0]])
    p, _ = _legendre_and_derivative(m, x)
    w = 2.0 / (m * (m + 1) * p * p)
    w[0] = w[-1] = 2.0 / (m * (m + 1))
    return Rule1D(x, w)


def shifted(rule: Rule1D, a: float, b: float) -> Rule1D:
    """Affine image of a rule on interval [a, b]."""
    a0, b0 = rule.interval
    scale = (b - a) / (b0 - a0)
    return Rule1D(a + (rule.nodes - a0) * scale, rule.weights * scale, (a, b))


def qsmooth(rule: Rule1D, q: int, singular_end: str = "left") -> Rule1D:
    """Polynomial smoothing of a rule on [0, 1] for endpoint singularities.

    Substitutes s = t**q (mirrored for a right singularity), which clusters
    nodes toward the singular endpoint and suppresses the error growth of
    logarithmic-type endpoint singularities.  q must be odd and >= 3.
    """
    if q % 2 == 0 or q < 3:
        raise ValueError(f"smoothing exponent must be odd and >= 3, got {q}")
    if rule.interval != (0.0, 1.0):
        raise ValueError("qsmooth expects a rule on [0, 1]")
    t, w = rule.nodes, rule.weights
    s = t**q
    ws = w * q * t ** (q - 1)
    if singular_end == "left":
        return Rule1D(s, ws, (0.0, 1.0))
    if singular_end == "right":
        return Rule1D((1.0 - s)[::-1], ws[::-1], (0.0, 1.0))
    raise ValueError(f"unknown singular_end {singular_end!r}")


def graded_rule(n: int, q: int, levels: int, singular_end: str = "left") -> Rule1D:
    """Composite rule on [0, 1] geometrically graded toward one endpoint.

    The n-point Gauss-Legendre rule is applied on dyadic pieces
    [0, 2^(1-levels)], ..., [1/2, 1] of the substituted variable; with
    q > 1 the pieces are pushed through the s = t**q smoothing map, with
    q = 1 the rule is plain graded (used for bounded kernels whose higher
    derivatives blow up at the endpoint).
    """
    if levels < 1:
        raise ValueError("need at least one grading level")
    if q != 1 and (q % 2 == 0 or q < 3):
        raise ValueError(f"smoothing exponent must be 1 or odd >= 3, got {q}")
    base = shifted(gauss_legendre(n), 0.0, 1.0)
    edges = [0.0] + [2.0 ** (i + 1 - levels) for i in range(levels)]
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        t = a + (b - a) * base.nodes
        w = (b - a) * base.weights
        ts.append(t**q)
        ws.append(w * q * t ** (q - 1) if q > 1 else w)
    t = np.concatenate(ts)
    w = np.concatenate(ws)
    if singular_end == "right":
        t, w = (1.0 - t)[::-1], w[::-1]
    elif singular_end != "left":
        raise ValueError(f"unknown singular_end {singular_end!r}")
    return Rule1D(t, w, (0.0, 1.0))


class BlendingPatch:
    """Transfinite (Coons) map from the reference square onto a quadrilateral
    with straight edges except for at most one curved edge.

    ``edges`` holds four parametrizations over [0, 1] running counter-
    clockwise: edge i joins corner i to corner i+1 (mod 4).  Each entry is
    either None (straight) or a pair of callables (eval, derivative).
    """

    def __init__(self, corners: np.ndarray, edges):
        self.corners = np.asarray(corners, dtype=float)
        if self.corners.shape != (4, 2):
            raise ValueError("blending patch needs exactly 4 corners")
        self.edges = list(edges)
        if len(self.edges) != 4:
            raise ValueError("blending patch needs exactly 4 edge entries")

    def _edge(self, i, s):
        ent = self.edges[i]
        a = self.corners[i]
        b = self.corners[(i + 1) % 4]
        if ent is None:
            s = np.asarray(s)[..., None]
            return a + s * (b - a), np.broadcast_to(b - a, s.shape[:-1] + (2,))
        ev, dv = ent
        return ev(s), dv(s)

    def __call__(self, xi, eta):
        """Map reference coordinates to physical points; returns (points,
        Jacobian determinant)."""
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        p0, p1, p2, p3 = self.corners
        bot, dbot = self._edge(0, xi)
        rgt, drgt = self._edge(1, eta)
        top_r, dtop_r = self._edge(2, 1.0 - xi)  # reversed: runs p3 -> p2
        lft_r, dlft_r = self._edge(3, 1.0 - eta)  # reversed: runs p0 -> p3
        top, dtop = top_r, -dtop_r
        lft, dlft = lft_r, -dlft_r

        xi_ = xi[..., None]
        eta_ = eta[..., None]
        blin = (
            (1 - xi_) * (1 - eta_) * p0
            + xi_ * (1 - eta_) * p1
            + xi_ * eta_ * p2
            + (1 - xi_) * eta_ * p3
        )
        pts = (1 - eta_) * bot + eta_ * top + (1 - xi_) * lft + xi_ * rgt - blin

        dxi = (
            (1 - eta_) * dbot
            + eta_ * dtop
            + (rgt - lft)
            - ((1 - eta_) * (p1 - p0) + eta_ * (p2 - p3))
        )
        deta = (
            (top - bot)
            + (1 - xi_) * dlft
            + xi_ * drgt
            - ((1 - xi_) * (p3 - p0) + xi_ * (p2 - p1))
        )
        jac = dxi[..., 0] * deta[..., 1] - dxi[..., 1] * deta[..., 0]
        return pts, jac


def transfinite_map(mesh, elem) -> BlendingPatch:
    """Blending map of a mesh element (delegates geometry to the mesh)."""
    corners, edges = mesh.element_patch(elem)
    return BlendingPatch(corners, edges)


def element_rule(mesh, elem, n: int) -> Rule2D:
    """n x n tensor Gauss-Legendre rule pushed through the blending map.

    Weights carry the Jacobian; a non-positive Jacobian at any node means
    the element is degenerate and raises.
    """
    patch = transfinite_map(mesh, elem)
    g = shifted(gauss_legendre(n), 0.0, 1.0)
    xi, eta = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    pts, jac = patch(xi.ravel(), eta.ravel())
    if np.any(jac <= 0.0):
        raise ValueError(
            f"degenerate element {getattr(elem, 'id', '?')}: "
            f"non-positive blending Jacobian (min {jac.min():.3e})"
        )
    w = np.outer(g.weights, g.weights).ravel() * jac
    return Rule2D(pts, w)
