"""Virtual element core on curved quadrilaterals: scaled monomial bases,
dof-computable H1 and L2 projectors, stabilized local forms, and assembly
of the global stiffness/mass/boundary-mass blocks.

Local degrees of freedom of an element are ordered as: the four vertex
values (ccw), then per edge the k-1 internal Gauss-Lobatto values (in
traversal order), then the k(k-1)/2 internal moments against the scaled
monomials of degree <= k-2 (normalized by 1/|E|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import quadrature
from .mesh import DofMap, Mesh, TAG_GAMMA, n_moment_dofs

__all__ = [
    "monomial_indices",
    "monomial_values",
    "monomial_gradients",
    "ElementOps",
    "compute_projectors",
    "local_stiffness",
    "local_mass",
    "GlobalBlocks",
    "assemble_fem_blocks",
    "boundary_mass",
]

_N_QUAD = 8  # tensor/edge quadrature order for all element integrals


def monomial_indices(k: int) -> np.ndarray:
    """Multi-indices of the scaled monomial basis of P_k, ordered by total
    degree: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ..."""
    out = []
    for d in range(k + 1):
        for j in range(d + 1):
            out.append((d - j, j))
    return np.array(out, dtype=int)


def monomial_values(pts, centroid, h, alphas) -> np.ndarray:
    """Scaled monomials ((x - V_E)/h_E)^alpha at given points, (npts, n_k)."""
    loc = (np.asarray(pts) - centroid) / h
    a1 = alphas[:, 0]
    a2 = alphas[:, 1]
    return loc[:, 0:1] ** a1 * loc[:, 1:2] ** a2


def monomial_gradients(pts, centroid, h, alphas) -> np.ndarray:
    """Gradients of the scaled monomials, (npts, n_k, 2); carries 1/h_E."""
    loc = (np.asarray(pts) - centroid) / h
    a1 = alphas[:, 0]
    a2 = alphas[:, 1]
    out = np.empty((loc.shape[0], len(alphas), 2))
    out[:, :, 0] = (a1 / h) * loc[:, 0:1] ** np.maximum(a1 - 1, 0) * loc[:, 1:2] ** a2
    out[:, :, 1] = (a2 / h) * loc[:, 0:1] ** a1 * loc[:, 1:2] ** np.maximum(a2 - 1, 0)
    return out


class _RefData:
    """Reference-interval data shared by every element of a given degree."""

    def __init__(self, k: int):
        self.k = k
        self.alphas = monomial_indices(k)
        self.n_k = len(self.alphas)
        self.n_loc = 4 * k + n_moment_dofs(k)
        g2 = quadrature.shifted(quadrature.gauss_legendre(_N_QUAD), 0.0, 1.0)
        xi, eta = np.meshgrid(g2.nodes, g2.nodes, indexing="ij")
        self.xi = xi.ravel()
        self.eta = eta.ravel()
        self.w2 = np.outer(g2.weights, g2.weights).ravel()
        # bilinear shape functions for the straight-element fast path
        x, e = self.xi, self.eta
        self.shape = np.stack([(1 - x) * (1 - e), x * (1 - e), x * e, (1 - x) * e], 1)
        self.d_xi = np.stack([-(1 - e), (1 - e), e, -e], 1)
        self.d_eta = np.stack([-(1 - x), -x, x, (1 - x)], 1)
        # edge rule and the trace Lagrange matrix at its nodes
        g1 = quadrature.shifted(quadrature.gauss_legendre(_N_QUAD), 0.0, 1.0)
        self.s_q = g1.nodes
        self.w_q = g1.weights
        lob = quadrature.gauss_lobatto(k + 1)
        self.nodes_e = 0.5 * (lob.nodes + 1.0)
        self.trace = _lagrange_matrix(self.nodes_e, self.s_q)  # (k+1, nq)
        # Laplacians of the scaled monomials in the (unscaled) basis of
        # degree k-2 monomials; the 1/h^2 factor is applied per element.
        self.lap = []
        lowidx = {tuple(a): c for c, a in enumerate(self.alphas[: n_moment_dofs(k)])}
        for a1, a2 in self.alphas:
            terms = []
            if a1 >= 2:
                terms.append((lowidx[(a1 - 2, a2)], a1 * (a1 - 1)))
            if a2 >= 2:
                terms.append((lowidx[(a1, a2 - 2)], a2 * (a2 - 1)))
            self.lap.append(terms)

    def edge_cols(self, slot: int):
        """Local dof columns of the trace nodes of edge ``slot``, ordered
        along the element traversal."""
        k = self.k
        cols = [slot]
        cols.extend(4 + slot * (k - 1) + a for a in range(k - 1))
        cols.append((slot + 1) % 4)
        return np.array(cols, dtype=int)


def _lagrange_matrix(nodes, pts):
    """Values of the Lagrange basis on ``nodes`` at ``pts``: (n_nodes, n_pts)."""
    out = np.ones((len(nodes), len(pts)))
    for i, xi in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != i:
                out[i] *= (pts - xm) / (xi - xm)
    return out


_REF_CACHE: dict[int, _RefData] = {}


def _ref(k: int) -> _RefData:
    if k not in _REF_CACHE:
        _REF_CACHE[k] = _RefData(k)
    return _REF_CACHE[k]


@dataclass
class ElementOps:
    """Projector and local-form matrices of one element.

    ``pnabla``/``p0`` map local dof vectors to scaled-monomial coefficients
    of the H1- and L2-projections; ``stiffness``/``mass`` are the stabilized
    local bilinear forms.
    """

    element: int
    k: int
    centroid: np.ndarray
    h: float
    area: float
    G: np.ndarray
    H: np.ndarray
    B: np.ndarray
    D: np.ndarray
    pnabla: np.ndarray
    p0: np.ndarray
    stiffness: np.ndarray
    mass: np.ndarray
    quad_points: np.ndarray
    quad_weights: np.ndarray


def _element_quadrature(m: Mesh, i: int, ref: _RefData):
    """Physical tensor-rule points and weights of element i."""
    eids = m.elem_edges[i]
    if np.all(m.edge_curve[eids] < 0):
        corners = m.vertices[m.elem_vertices[i]]
        pts = ref.shape @ corners
        gx = ref.d_xi @ corners
        gy = ref.d_eta @ corners
        jac = gx[:, 0] * gy[:, 1] - gx[:, 1] * gy[:, 0]
        if np.any(jac <= 0):
            raise ValueError(f"element {i}: non-positive Jacobian")
        return pts, ref.w2 * jac
    patch = quadrature.transfinite_map(m, i)
    pts, jac = patch(ref.xi, ref.eta)
    if np.any(jac <= 0):
        raise ValueError(f"element {i}: non-positive blending Jacobian")
    return pts, ref.w2 * jac


def compute_projectors(m: Mesh, i: int, k: int) -> ElementOps:
    """H1 and L2 projectors of element ``i`` computed from dofs alone.

    The H1 projector solves the gradient Gram system with right-hand sides
    obtained by integration by parts (moment dofs for the volume part,
    edge-wise Gauss quadrature of the dof-interpolated traces for the
    boundary part); its rank deficiency on constants is closed with the
    boundary-mean constraint.  The L2 projector reads moments up to degree
    k-2 from the dofs and takes the higher ones from the H1 projection.
    """
    ref = _ref(k)
    V = m.elem_centroid[i]
    hE = float(m.elem_diameter[i])
    area = float(m.elem_area[i])
    n_k, n_loc = ref.n_k, ref.n_loc
    nmom = n_moment_dofs(k)

    pts, w = _element_quadrature(m, i, ref)
    vals = monomial_values(pts, V, hE, ref.alphas)
    grads = monomial_gradients(pts, V, hE, ref.alphas)

    H = vals.T @ (vals * w[:, None])
    G = grads[:, :, 0].T @ (grads[:, :, 0] * w[:, None]) + grads[:, :, 1].T @ (
        grads[:, :, 1] * w[:, None]
    )

    B = np.zeros((n_k, n_loc))
    corners = m.vertices[m.elem_vertices[i]]
    nq = len(ref.s_q)
    # edge quadrature geometry, all four edges at once (curved ones patched in)
    nxt = np.roll(corners, -1, axis=0)
    ept = corners[:, None, :] + ref.s_q[None, :, None] * (nxt - corners)[:, None, :]
    tang = np.broadcast_to((nxt - corners)[:, None, :], (4, nq, 2)).copy()
    eids = m.elem_edges[i]
    for slot in np.flatnonzero(m.edge_curve[eids] >= 0):
        ev, dv = m.edge_param(int(eids[slot]), int(m.elem_edge_dir[i, slot]))
        ept[slot] = ev(ref.s_q)
        tang[slot] = dv(ref.s_q)
    speed = np.hypot(tang[..., 0], tang[..., 1])
    # ccw traversal: outward normal is the tangent rotated by -90 deg
    wline = ref.w_q * speed  # (4, nq)
    flat = ept.reshape(-1, 2)
    gv = monomial_gradients(flat, V, hE, ref.alphas).reshape(4, nq, n_k, 2)
    gn = (gv[..., 0] * tang[..., 1, None] - gv[..., 1] * tang[..., 0, None]) / speed[
        ..., None
    ]
    contrib = (gn * wline[..., None]).transpose(0, 2, 1) @ ref.trace.T  # (4,n_k,k+1)
    bmean_dof = np.zeros(n_loc)  # integral of each basis trace over dE
    for slot in range(4):
        cols = ref.edge_cols(slot)
        B[:, cols] += contrib[slot]
        bmean_dof[cols] += ref.trace @ wline[slot]
    bmean_mono = (
        monomial_values(flat, V, hE, ref.alphas).reshape(4, nq, n_k)
        * wline[..., None]
    ).sum((0, 1))
    # volume part -int_E v lap(p_alpha), read off the scaled moment dofs
    for a, terms in enumerate(ref.lap):
        for col, coef in terms:
            B[a, n_loc - nmom + col] -= area * coef / hE**2

    Gt = G.copy()
    Bt = B.copy()
    Gt[0] = bmean_mono
    Bt[0] = bmean_dof
    try:
        pnabla = np.linalg.solve(Gt, Bt)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"element {i}: singular projector system") from exc

    # dofs of the monomials
    D = np.zeros((n_loc, n_k))
    D[:4] = monomial_values(corners, V, hE, ref.alphas)
    if k > 1:
        s_int = ref.nodes_e[1:-1]
        dpts = corners[:, None, :] + s_int[None, :, None] * (nxt - corners)[:, None, :]
        for slot in np.flatnonzero(m.edge_curve[eids] >= 0):
            ev, _ = m.edge_param(int(eids[slot]), int(m.elem_edge_dir[i, slot]))
            dpts[slot] = ev(s_int)
        D[4:4 + 4 * (k - 1)] = monomial_values(dpts.reshape(-1, 2), V, hE, ref.alphas)
    if nmom:
        D[n_loc - nmom:] = H[:nmom, :] / area

    # enhanced-space L2 projector
    C = np.empty((n_k, n_loc))
    if nmom:
        C[:nmom] = 0.0
        C[np.arange(nmom), n_loc - nmom + np.arange(nmom)] = area
    C[nmom:] = H[nmom:] @ pnabla
    try:
        p0 = np.linalg.solve(H, C)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"element {i}: singular mass Gram") from exc

    resid = np.eye(n_loc) - D @ pnabla
    stiffness = pnabla.T @ G @ pnabla + resid.T @ resid
    mass = p0.T @ H @ p0

    return ElementOps(
        element=i, k=k, centroid=V, h=hE, area=area, G=G, H=H, B=B, D=D,
        pnabla=pnabla, p0=p0, stiffness=stiffness, mass=mass,
        quad_points=pts, quad_weights=w,
    )


def local_stiffness(m: Mesh, i: int, k: int) -> np.ndarray:
    """Stabilized local stiffness matrix (consistency + dof stabilization)."""
    return compute_projectors(m, i, k).stiffness


def local_mass(m: Mesh, i: int, k: int) -> np.ndarray:
    """Local mass matrix through the L2 projector (no stabilization)."""
    return compute_projectors(m, i, k).mass


@dataclass
class GlobalBlocks:
    """Assembled global matrices in the unknown numbering.

    ``lift_A``/``lift_M`` hold the columns belonging to the constrained
    boundary dofs (the Dirichlet side); ``Q_gamma`` is the boundary mass on
    the artificial boundary in the ordering ``gamma_dofs``.
    """

    A: sp.csr_matrix
    M: sp.csr_matrix
    lift_A: sp.csr_matrix
    lift_M: sp.csr_matrix
    Q_gamma: sp.csr_matrix
    gamma_dofs: np.ndarray


def assemble_fem_blocks(m: Mesh, dm: DofMap, k: int, gamma_order=None,
                        collect_ops: list | None = None) -> GlobalBlocks:
    """Scatter the local forms into global sparse blocks and split the
    constrained columns off for Dirichlet lifting.

    When ``collect_ops`` is a list, the per-element projector data needed
    later for error norms is appended to it, saving the second projector
    pass on meshes small enough to afford the memory."""
    if k != dm.k:
        raise ValueError("degree mismatch between dof map and assembly")
    ref = _ref(k)
    n_loc = ref.n_loc
    ne = m.n_elements
    rows = np.empty(ne * n_loc * n_loc, dtype=np.int64)
    cols = np.empty_like(rows)
    a_val = np.empty(ne * n_loc * n_loc)
    m_val = np.empty_like(a_val)
    ptr = 0
    for i in range(ne):
        ops = compute_projectors(m, i, k)
        idx = dm.element_dofs(m, i)
        block = n_loc * n_loc
        rows[ptr:ptr + block] = np.repeat(idx, n_loc)
        cols[ptr:ptr + block] = np.tile(idx, n_loc)
        a_val[ptr:ptr + block] = ops.stiffness.ravel()
        m_val[ptr:ptr + block] = ops.mass.ravel()
        ptr += block
        if collect_ops is not None:
            collect_ops.append(
                (ops.pnabla, ops.p0, ops.quad_points, ops.quad_weights,
                 ops.centroid, ops.h)
            )
    n, nc = dm.n_unknown, dm.n_constrained
    A_full = sp.coo_matrix((a_val, (rows, cols)), shape=(n + nc, n + nc)).tocsr()
    M_full = sp.coo_matrix((m_val, (rows, cols)), shape=(n + nc, n + nc)).tocsr()

    Q, gamma_dofs = boundary_mass(m, dm, gamma_order)
    return GlobalBlocks(
        A=A_full[:n, :n],
        M=M_full[:n, :n],
        lift_A=A_full[:n, n:],
        lift_M=M_full[:n, n:],
        Q_gamma=Q,
        gamma_dofs=gamma_dofs,
    )


def boundary_mass(m: Mesh, dm: DofMap, gamma_order=None):
    """Mass matrix of the trace basis on the artificial boundary, assembled
    edge-wise with 9-point Gauss-Legendre on each edge parametrization."""
    k = dm.k
    if gamma_order is None:
        gamma_dofs = dm.set_gamma.copy()
    else:
        gamma_dofs = np.asarray(gamma_order, dtype=np.int64)
        if not np.array_equal(np.sort(gamma_dofs), dm.set_gamma):
            raise ValueError("gamma_order must enumerate exactly the Gamma dofs")
    pos = {int(g): p for p, g in enumerate(gamma_dofs)}

    g9 = quadrature.shifted(quadrature.gauss_legendre(9), 0.0, 1.0)
    lob = quadrature.gauss_lobatto(k + 1)
    nodes_e = 0.5 * (lob.nodes + 1.0)
    trace = _lagrange_matrix(nodes_e, g9.nodes)

    ng = len(gamma_dofs)
    rows, cols, vals = [], [], []
    for e in range(m.n_edges):
        if m.edge_tag[e] != TAG_GAMMA:
            continue
        _, dv = m.edge_param(e)
        speed = np.hypot(*dv(g9.nodes).T)
        wline = g9.weights * speed
        block = trace @ (wline[:, None] * trace.T)
        gd = [dm._vertex_dof[m.edge_v[e, 0]]]
        gd.extend(dm._edge_dof[e])
        gd.append(dm._vertex_dof[m.edge_v[e, 1]])
        loc = [pos[int(g)] for g in gd]
        for a, pa in enumerate(loc):
            for b, pb in enumerate(loc):
                rows.append(pa)
                cols.append(pb)
                vals.append(block[a, b])
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(ng, ng)).tocsr()
    return Q, gamma_dofs
