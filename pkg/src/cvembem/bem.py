"""Galerkin boundary-element matrices on the artificial boundary: the
single-layer matrix (Helmholtz, or Laplace for the coercivity check) and
the double-layer matrix, with singularity-aware quadrature.

Pair classification drives the quadrature:

* coincident and contiguous panel pairs (overlapping or touching basis
  supports) are integrated with composite Gauss rules geometrically graded
  toward the near point; the single-layer integrand additionally gets the
  cubic smoothing substitution that annihilates its logarithmic
  singularity, while the bounded double-layer kernel is integrated with
  plain grading (pushing nodes into the cancellation region of its
  0/0 limit would amplify roundoff instead of helping);
* all remaining pairs use a tensor Gauss-Legendre product rule.

The base product rule is 9 (outer) x 8 (inner) points; when the wavenumber
resolves fewer than a couple of points per wavelength on a panel the
orders are raised accordingly, which only triggers on coarse meshes with
large kappa.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .mesh import DofMap, Mesh, TAG_GAMMA
from .specfun import hankel1

__all__ = [
    "BoundaryMesh",
    "BemMatrices",
    "QuadPolicy",
    "boundary_mesh",
    "assemble_V",
    "assemble_K",
    "nrbc_row_block",
]

_R_FLOOR = 1e-280  # guards kernel evaluation where graded offsets underflow


@dataclass
class BoundaryMesh:
    """Ordered (ccw) decomposition of the artificial boundary into panels.

    Panel p runs from node p*k to node (p+1)*k (cyclically) in the global
    trace-dof ordering ``gamma_dofs``; ``panel_dofs`` gives the k+1 local
    trace node positions of each panel in that ordering.
    """

    k: int
    gamma_dofs: np.ndarray     # global unknown ids, cyclic boundary order
    panel_dofs: np.ndarray     # (P, k+1) indices into gamma_dofs
    evals: list                # per panel: position callable on [0, 1]
    derivs: list               # per panel: derivative callable on [0, 1]
    arclength: np.ndarray      # per panel

    @property
    def n_panels(self):
        return len(self.evals)

    @property
    def n_dofs(self):
        return len(self.gamma_dofs)


def boundary_mesh(m: Mesh, dm: DofMap) -> BoundaryMesh:
    """Walk the artificial-boundary edges into a closed ccw panel chain."""
    k = dm.k
    gamma_edges = [e for e in range(m.n_edges) if m.edge_tag[e] == TAG_GAMMA]
    if not gamma_edges:
        raise ValueError("mesh has no edges tagged as the artificial boundary")
    # vertex -> outgoing/incoming edges on Gamma
    touching: dict[int, list[int]] = {}
    for e in gamma_edges:
        for v in m.edge_v[e]:
            touching.setdefault(int(v), []).append(e)
    if any(len(v) != 2 for v in touching.values()):
        raise ValueError("artificial boundary is not a single closed curve")

    start = gamma_edges[0]
    chain = [(start, 1)]
    v_end = int(m.edge_v[start, 1])
    while v_end != int(m.edge_v[start, 0]):
        e_prev = chain[-1][0]
        nxt = [e for e in touching[v_end] if e != e_prev]
        e = nxt[0]
        direction = 1 if int(m.edge_v[e, 0]) == v_end else -1
        chain.append((e, direction))
        v_end = int(m.edge_v[e, 1] if direction == 1 else m.edge_v[e, 0])
    if len(chain) != len(gamma_edges):
        raise ValueError("artificial boundary is not connected")

    # enforce ccw orientation (positive signed area of the node polygon)
    poly = np.array([
        m.vertices[m.edge_v[e, 0] if d == 1 else m.edge_v[e, 1]] for e, d in chain
    ])
    area2 = np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    if area2 < 0:
        chain = [(e, -d) for e, d in reversed(chain)]

    evals, derivs, gdofs, panel_dofs = [], [], [], []
    for e, d in chain:
        ev, dv = m.edge_param(e, d)
        evals.append(ev)
        derivs.append(dv)
        v0 = m.edge_v[e, 0] if d == 1 else m.edge_v[e, 1]
        internals = dm._edge_dof[e] if d == 1 else dm._edge_dof[e][::-1]
        base = len(gdofs)
        gdofs.append(int(dm._vertex_dof[v0]))
        gdofs.extend(int(g) for g in internals)
        panel_dofs.append([base + a for a in range(k)] + [(base + k) % (len(chain) * k)])
    gamma_dofs = np.asarray(gdofs, dtype=np.int64)
    panel_dofs = np.asarray(panel_dofs, dtype=np.int64)

    g = quadrature.shifted(quadrature.gauss_legendre(16), 0.0, 1.0)
    arclength = np.array([
        float(np.sum(g.weights * np.hypot(*dv(g.nodes).T))) for dv in derivs
    ])
    return BoundaryMesh(k=k, gamma_dofs=gamma_dofs, panel_dofs=panel_dofs,
                        evals=evals, derivs=derivs, arclength=arclength)


@dataclass
class QuadPolicy:
    """Quadrature orders and grading depths for the panel-pair integrals."""

    n_out: int = 9
    n_in: int = 8
    q_smooth: int = 3
    grade_inner: int = 6
    grade_outer: int = 5

    @staticmethod
    def for_problem(bm: BoundaryMesh, kappa: float, n_out: int = 9,
                    n_in: int = 8) -> "QuadPolicy":
        """Raise the base orders when a panel holds more oscillation than
        the base rules resolve (coarse mesh and large kappa)."""
        extra = max(0, int(np.ceil(1.1 * kappa * bm.arclength.max())) - 2)
        extra = min(extra, 15)
        return QuadPolicy(n_out=n_out + extra, n_in=n_in + extra)


@dataclass
class BemMatrices:
    V: np.ndarray
    K: np.ndarray
    kappa: float


def _single_layer_kernel(kappa):
    if kappa == 0.0:
        return lambda r: -np.log(r) / (2.0 * np.pi)
    return lambda r: 0.25j * hankel1(0, kappa * r)


def _double_layer_kernel(kappa):
    # kernel dG/dn_y with n_y the outward normal of the computational domain
    if kappa == 0.0:
        return lambda r, rn: rn / (2.0 * np.pi * r * r)
    return lambda r, rn: 0.25j * kappa * (rn / r) * hankel1(1, kappa * r)


def _lagrange_at(nodes, s):
    """Lagrange basis on ``nodes`` evaluated at arbitrary points ``s``;
    returns (len(nodes),) + s.shape."""
    s = np.asarray(s)
    out = np.ones((len(nodes),) + s.shape)
    for i, xi in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != i:
                out[i] *= (s - xm) / (xi - xm)
    return out


def _trace_nodes(k):
    lob = quadrature.gauss_lobatto(k + 1)
    return 0.5 * (lob.nodes + 1.0)


def _pair_categories(P):
    """Regular / contiguous-next / contiguous-prev / coincident pair lists."""
    pairs = [(p, r) for p in range(P) for r in range(P)]
    coin, next_, prev, reg = [], [], [], []
    for p, r in pairs:
        if p == r:
            coin.append((p, r))
        elif r == (p + 1) % P:
            next_.append((p, r))
        elif r == (p - 1) % P:
            prev.append((p, r))
        else:
            reg.append((p, r))
    return reg, next_, prev, coin


def _panel_geometry(bm, s):
    """Points, quadrature-ready speeds and outward normals of every panel at
    the parameters ``s``: arrays of shape (P,) + s.shape + trailing dims."""
    P = bm.n_panels
    pts = np.empty((P,) + s.shape + (2,))
    tg = np.empty_like(pts)
    for p in range(P):
        pts[p] = bm.evals[p](s)
        tg[p] = bm.derivs[p](s)
    speed = np.hypot(tg[..., 0], tg[..., 1])
    nrm = np.stack([tg[..., 1], -tg[..., 0]], axis=-1) / speed[..., None]
    return pts, speed, nrm


def _pair_blocks(kern_v, kern_k, geo_out, geo_in, to, ti, w_out, w_in,
                 p_idx, r_idx, want_v, want_k, chunk=512):
    """V/K blocks for pairs (p_idx[b], r_idx[b]) with fixed 1D rules on both
    sides, batched over pairs."""
    xo, so, _ = geo_out
    yi, si, ni = geo_in
    nb = len(p_idx)
    Vb = np.empty((nb, to.shape[0], ti.shape[0]), dtype=complex) if want_v else None
    Kb = np.empty_like(Vb) if want_k and want_v else (
        np.empty((nb, to.shape[0], ti.shape[0]), dtype=complex) if want_k else None)
    for lo in range(0, nb, chunk):
        p = p_idx[lo:lo + chunk]
        r = r_idx[lo:lo + chunk]
        d = xo[p][:, :, None, :] - yi[r][:, None, :, :]
        dist = np.maximum(np.hypot(d[..., 0], d[..., 1]), _R_FLOOR)
        wo = w_out * so[p]
        wi = w_in * si[r]
        if want_v:
            Vb[lo:lo + chunk] = np.einsum(
                "bqs,aq,cs,bq,bs->bac", kern_v(dist), to, ti, wo, wi,
                optimize=True)
        if want_k:
            rn = (d * ni[r][:, None, :, :]).sum(-1)
            Kb[lo:lo + chunk] = np.einsum(
                "bqs,aq,cs,bq,bs->bac", kern_k(dist, rn), to, ti, wo, wi,
                optimize=True)
    return Vb, Kb


class _CoincidentRule:
    """Reference quadrature data for a panel against itself: outer nodes
    graded toward both panel ends; for each outer node the inner interval
    is split there and graded toward the split (smoothed for q > 1)."""

    def __init__(self, k, pol, smooth):
        q = pol.q_smooth if smooth else 1
        go = quadrature.graded_rule(pol.n_out, q, pol.grade_outer, "left")
        gi = quadrature.graded_rule(pol.n_in, q, pol.grade_inner, "left")
        self.t_out = np.concatenate([0.5 * go.nodes, 1.0 - 0.5 * go.nodes])
        self.w_out = np.concatenate([0.5 * go.weights, 0.5 * go.weights])
        tt = self.t_out[:, None]
        self.s_in = np.concatenate([tt - tt * gi.nodes, tt + (1 - tt) * gi.nodes], 1)
        self.w_in = np.concatenate([tt * gi.weights, (1 - tt) * gi.weights], 1)
        nodes = _trace_nodes(k)
        self.to = _lagrange_at(nodes, self.t_out)  # (k+1, no)
        self.ti = _lagrange_at(nodes, self.s_in)  # (k+1, no, ns)


def _coincident_blocks(bm, panels, rule, kernel, smooth, chunk=64):
    """Self-interaction blocks of the listed panels, (n_panels, k+1, k+1)."""
    out = np.empty((len(panels), rule.to.shape[0], rule.to.shape[0]),
                   dtype=complex)
    for lo in range(0, len(panels), chunk):
        sub = panels[lo:lo + chunk]
        c = len(sub)
        no, ns = rule.s_in.shape
        xo = np.empty((c, no, 2))
        tgo = np.empty_like(xo)
        yi = np.empty((c, no, ns, 2))
        tgi = np.empty_like(yi)
        for b, p in enumerate(sub):
            xo[b] = bm.evals[p](rule.t_out)
            tgo[b] = bm.derivs[p](rule.t_out)
            yi[b] = bm.evals[p](rule.s_in)
            tgi[b] = bm.derivs[p](rule.s_in)
        wo = rule.w_out * np.hypot(tgo[..., 0], tgo[..., 1])
        sin = np.hypot(tgi[..., 0], tgi[..., 1])
        wi = rule.w_in * sin
        d = xo[:, :, None, :] - yi
        dist = np.maximum(np.hypot(d[..., 0], d[..., 1]), _R_FLOOR)
        if smooth:
            kern = kernel(dist)
        else:
            rn = (d[..., 0] * tgi[..., 1] - d[..., 1] * tgi[..., 0]) / sin
            kern = kernel(dist, rn)
        out[lo:lo + chunk] = np.einsum(
            "bqs,aq,cqs,bq,bqs->bac", kern, rule.to, rule.ti, wo, wi,
            optimize=True)
    return out


def _assemble(bm: BoundaryMesh, kappa: float, pol: QuadPolicy,
              want_v: bool, want_k: bool):
    k = bm.k
    P = bm.n_panels
    n = bm.n_dofs
    kv = _single_layer_kernel(kappa)
    kk = _double_layer_kernel(kappa)
    V = np.zeros((n, n), dtype=complex) if want_v else None
    K = np.zeros((n, n), dtype=complex) if want_k else None
    reg, nxt, prv, coin = _pair_categories(P)
    nodes = _trace_nodes(k)

    def scatter(mat, pairs, blocks):
        rows = bm.panel_dofs[[p for p, _ in pairs]][:, :, None]
        cols = bm.panel_dofs[[r for _, r in pairs]][:, None, :]
        np.add.at(mat, (np.broadcast_to(rows, blocks.shape).ravel(),
                        np.broadcast_to(cols, blocks.shape).ravel()),
                  blocks.ravel())

    # regular pairs: plain product rule
    if reg:
        g_out = quadrature.shifted(quadrature.gauss_legendre(pol.n_out), 0.0, 1.0)
        g_in = quadrature.shifted(quadrature.gauss_legendre(pol.n_in), 0.0, 1.0)
        geo_out = _panel_geometry(bm, g_out.nodes)
        geo_in = _panel_geometry(bm, g_in.nodes)
        to = _lagrange_at(nodes, g_out.nodes)
        ti = _lagrange_at(nodes, g_in.nodes)
        p_idx = np.array([p for p, _ in reg])
        r_idx = np.array([r for _, r in reg])
        Vb, Kb = _pair_blocks(kv, kk, geo_out, geo_in, to, ti, g_out.weights,
                              g_in.weights, p_idx, r_idx, want_v, want_k)
        if want_v:
            scatter(V, reg, Vb)
        if want_k:
            scatter(K, reg, Kb)

    # contiguous pairs: graded (and smoothed, for V) toward the shared point
    for pairs, shared_at_out_end in ((nxt, True), (prv, False)):
        if not pairs:
            continue
        out_end = "right" if shared_at_out_end else "left"
        in_end = "left" if shared_at_out_end else "right"
        p_idx = np.array([p for p, _ in pairs])
        r_idx = np.array([r for _, r in pairs])
        for is_v in (True, False):
            if (is_v and not want_v) or (not is_v and not want_k):
                continue
            q = pol.q_smooth if is_v else 1
            ro = quadrature.graded_rule(pol.n_out, q, pol.grade_outer, out_end)
            ri = quadrature.graded_rule(pol.n_in, q, pol.grade_inner, in_end)
            geo_out = _panel_geometry(bm, ro.nodes)
            geo_in = _panel_geometry(bm, ri.nodes)
            to = _lagrange_at(nodes, ro.nodes)
            ti = _lagrange_at(nodes, ri.nodes)
            Vb, Kb = _pair_blocks(kv, kk, geo_out, geo_in, to, ti, ro.weights,
                                  ri.weights, p_idx, r_idx, is_v, not is_v)
            scatter(V if is_v else K, pairs, Vb if is_v else Kb)

    # coincident pairs: inner split at the outer node
    panels = [p for p, _ in coin]
    if panels:
        if want_v:
            rule = _CoincidentRule(k, pol, smooth=True)
            blocks = _coincident_blocks(bm, panels, rule, kv, smooth=True)
            scatter(V, coin, blocks)
        if want_k:
            rule = _CoincidentRule(k, pol, smooth=False)
            blocks = _coincident_blocks(bm, panels, rule, kk, smooth=False)
            scatter(K, coin, blocks)
    return V, K


def assemble_V(bm: BoundaryMesh, kappa: float, policy: QuadPolicy | None = None):
    """Galerkin single-layer matrix on the artificial boundary.

    kappa > 0 uses the outgoing Helmholtz kernel; kappa = 0 the Laplace
    log kernel (coercivity checks)."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    pol = policy or QuadPolicy.for_problem(bm, kappa)
    V, _ = _assemble(bm, kappa, pol, want_v=True, want_k=False)
    return V


def assemble_K(bm: BoundaryMesh, kappa: float, policy: QuadPolicy | None = None):
    """Galerkin double-layer matrix (kernel dG/dn_y, outward normal)."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    pol = policy or QuadPolicy.for_problem(bm, kappa)
    _, K = _assemble(bm, kappa, pol, want_v=False, want_k=True)
    return K


def assemble_bem(bm: BoundaryMesh, kappa: float, policy: QuadPolicy | None = None) -> BemMatrices:
    """Both boundary matrices in one pass over the pair categories."""
    pol = policy or QuadPolicy.for_problem(bm, kappa)
    V, K = _assemble(bm, kappa, pol, want_v=True, want_k=True)
    return BemMatrices(V=V, K=K, kappa=kappa)


def nrbc_row_block(bm: BoundaryMesh, bem: BemMatrices, Q_gamma):
    """Blocks of the non-reflecting condition row: (Q/2 - K, V).

    Q_gamma must be ordered like ``bm.gamma_dofs``."""
    Q = Q_gamma.toarray() if hasattr(Q_gamma, "toarray") else np.asarray(Q_gamma)
    if Q.shape != bem.K.shape:
        raise ValueError("boundary mass and BEM matrices disagree in size")
    return 0.5 * Q - bem.K, bem.V
