"""Curved quadrilateral meshes of the computational domain.

Meshes are stored as flat numpy arrays (vertices, edges, elements) plus a
list of analytic curves backing the curved boundary edges.  Generators for
the two benchmark domains (circular annulus, square ring), conforming
quadrisection refinement, the degree-of-freedom map and a line-oriented
text format are provided.

Element geometry (area, mass center, diameter) is computed with the tensor
quadrature rule on the blending patch so straight and curved elements go
through one code path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .geometry import Circle, Curve, ParamInterval, Segment, curve_eval, curve_derivative

__all__ = [
    "TAG_INTERIOR",
    "TAG_GAMMA0",
    "TAG_GAMMA",
    "Element",
    "Mesh",
    "DofMap",
    "MeshFormatError",
    "build_annulus_mesh",
    "build_square_ring_mesh",
    "refine",
    "build_dof_map",
    "write_mesh",
    "read_mesh",
]

TAG_INTERIOR = 0
TAG_GAMMA0 = 1
TAG_GAMMA = 2

_TAG_NAMES = {TAG_INTERIOR: "interior", TAG_GAMMA0: "gamma0", TAG_GAMMA: "gamma"}
_TAG_VALUES = {v: k for k, v in _TAG_NAMES.items()}

# Mesh-regularity parameter for the star-shapedness / edge-length checks.
RHO_REGULARITY = 0.1


@dataclass(frozen=True)
class Element:
    """Read-only view of one mesh element."""

    id: int
    vertex_ids: np.ndarray
    edge_ids: np.ndarray
    edge_dirs: np.ndarray
    centroid: np.ndarray
    diameter: float
    area: float


class MeshFormatError(ValueError):
    """Raised for malformed mesh files; message carries the line number."""


class Mesh:
    """Conforming decomposition into quadrilaterals with at most one curved
    edge per element (curved edges only on the domain boundary)."""

    def __init__(self, vertices, vertex_tag, curves, edge_v, edge_curve,
                 edge_t, edge_tag, elem_vertices, elem_edges, elem_edge_dir,
                 level=0, validate=True):
        self.vertices = np.asarray(vertices, dtype=float)
        self.vertex_tag = np.asarray(vertex_tag, dtype=np.int8)
        self.curves: list[Curve] = list(curves)
        self.edge_v = np.asarray(edge_v, dtype=np.int64)
        self.edge_curve = np.asarray(edge_curve, dtype=np.int64)
        self.edge_t = np.asarray(edge_t, dtype=float)
        self.edge_tag = np.asarray(edge_tag, dtype=np.int8)
        self.elem_vertices = np.asarray(elem_vertices, dtype=np.int64)
        self.elem_edges = np.asarray(elem_edges, dtype=np.int64)
        self.elem_edge_dir = np.asarray(elem_edge_dir, dtype=np.int8)
        self.level = int(level)
        self.elem_area = None
        self.elem_centroid = None
        self.elem_diameter = None
        self.h = None
        self._compute_geometry()
        if validate:
            self._validate()

    # ------------------------------------------------------------------
    # basic accessors
    # ------------------------------------------------------------------
    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_edges(self):
        return self.edge_v.shape[0]

    @property
    def n_elements(self):
        return self.elem_vertices.shape[0]

    def element(self, i: int) -> Element:
        return Element(
            id=i,
            vertex_ids=self.elem_vertices[i],
            edge_ids=self.elem_edges[i],
            edge_dirs=self.elem_edge_dir[i],
            centroid=self.elem_centroid[i],
            diameter=float(self.elem_diameter[i]),
            area=float(self.elem_area[i]),
        )

    def edge_interval(self, e: int) -> ParamInterval:
        t0, t1 = self.edge_t[e]
        return ParamInterval(min(t0, t1), max(t0, t1))

    def edge_param(self, e: int, direction: int = 1):
        """Parametrization of edge ``e`` over [0, 1] as (eval, deriv)
        callables, oriented v_from -> v_to for direction +1."""
        v0, v1 = self.edge_v[e]
        ci = self.edge_curve[e]
        if ci < 0:
            a = self.vertices[v0].copy()
            b = self.vertices[v1].copy()
            if direction < 0:
                a, b = b, a
            d = b - a

            def ev(s, a=a, d=d):
                s = np.asarray(s, dtype=float)
                return a + s[..., None] * d

            def dv(s, d=d):
                s = np.asarray(s, dtype=float)
                return np.broadcast_to(d, s.shape + (2,)).copy()

            return ev, dv
        c = self.curves[ci]
        ta, tb = self.edge_t[e]
        if direction < 0:
            ta, tb = tb, ta
        span = tb - ta

        def ev(s, c=c, ta=ta, span=span):
            s = np.asarray(s, dtype=float)
            return curve_eval(c, ta + s * span)

        def dv(s, c=c, ta=ta, span=span):
            s = np.asarray(s, dtype=float)
            return curve_derivative(c, ta + s * span) * span

        return ev, dv

    def element_patch(self, elem):
        """Corner coordinates and edge parametrizations for the blending
        map of an element (integer id or Element view)."""
        i = elem if isinstance(elem, (int, np.integer)) else elem.id
        vids = self.elem_vertices[i]
        corners = self.vertices[vids]
        edges = []
        for slot in range(4):
            e = self.elem_edges[i, slot]
            if self.edge_curve[e] < 0:
                edges.append(None)
            else:
                edges.append(self.edge_param(e, int(self.elem_edge_dir[i, slot])))
        return corners, edges

    # ------------------------------------------------------------------
    # derived geometry and validity checks
    # ------------------------------------------------------------------
    def _compute_geometry(self):
        """Area, mass center and diameter by the n=8 tensor quadrature rule.

        Elements with straight edges only (the bulk of the mesh) are done in
        one vectorized pass through the bilinear map; elements touching a
        curved boundary go through the generic blending patch one by one.
        """
        ne = self.n_elements
        self.elem_area = np.empty(ne)
        self.elem_centroid = np.empty((ne, 2))
        self.elem_diameter = np.empty(ne)

        has_curved = (self.edge_curve[self.elem_edges] >= 0).any(axis=1)
        straight = np.flatnonzero(~has_curved)
        if straight.size:
            g = quadrature.shifted(quadrature.gauss_legendre(8), 0.0, 1.0)
            xi, eta = np.meshgrid(g.nodes, g.nodes, indexing="ij")
            xi = xi.ravel()
            eta = eta.ravel()
            w = np.outer(g.weights, g.weights).ravel()
            shape = np.stack(
                [(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta], axis=1
            )
            d_xi = np.stack([-(1 - eta), (1 - eta), eta, -eta], axis=1)
            d_eta = np.stack([-(1 - xi), -xi, xi, (1 - xi)], axis=1)
            corners = self.vertices[self.elem_vertices[straight]]  # (n,4,2)
            pts = np.einsum("qa,nad->nqd", shape, corners)
            gx = np.einsum("qa,nad->nqd", d_xi, corners)
            gy = np.einsum("qa,nad->nqd", d_eta, corners)
            jac = gx[..., 0] * gy[..., 1] - gx[..., 1] * gy[..., 0]
            if np.any(jac <= 0.0):
                bad = straight[np.any(jac <= 0.0, axis=1)][0]
                raise ValueError(f"element {bad} has a non-positive Jacobian")
            area = jac @ w
            self.elem_area[straight] = area
            self.elem_centroid[straight] = (
                np.einsum("q,nq,nqd->nd", w, jac, pts) / area[:, None]
            )
            d2 = ((corners[:, :, None, :] - corners[:, None, :, :]) ** 2).sum(-1)
            self.elem_diameter[straight] = np.sqrt(d2.reshape(straight.size, -1).max(1))

        smid = np.array([0.25, 0.5, 0.75])
        for i in np.flatnonzero(has_curved):
            rule = quadrature.element_rule(self, int(i), 8)
            area = rule.weights.sum()
            if area <= 0.0:
                raise ValueError(f"element {i} has non-positive area {area}")
            self.elem_area[i] = area
            self.elem_centroid[i] = rule.weights @ rule.points / area
            pts = [self.vertices[self.elem_vertices[i]]]
            for slot in range(4):
                e = self.elem_edges[i, slot]
                if self.edge_curve[e] >= 0:
                    ev, _ = self.edge_param(int(e))
                    pts.append(ev(smid))
            pts = np.vstack(pts)
            d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
            self.elem_diameter[i] = np.sqrt(d2.max())
        self.h = float(self.elem_diameter.max())

    def _edge_length(self, e: int) -> float:
        if self.edge_curve[e] < 0:
            v0, v1 = self.edge_v[e]
            return float(np.linalg.norm(self.vertices[v1] - self.vertices[v0]))
        _, dv = self.edge_param(e)
        g = quadrature.shifted(quadrature.gauss_legendre(8), 0.0, 1.0)
        return float(np.sum(g.weights * np.linalg.norm(dv(g.nodes), axis=-1)))

    def _validate(self):
        if np.any(~np.isfinite(self.vertices)):
            raise ValueError("non-finite vertex coordinates")
        # curved edges must sit on a boundary and match their curve endpoints
        for e in range(self.n_edges):
            ci = self.edge_curve[e]
            if ci < 0:
                continue
            if self.edge_tag[e] == TAG_INTERIOR:
                raise ValueError(f"curved edge {e} is not on the boundary")
            for vid, t in zip(self.edge_v[e], self.edge_t[e]):
                p = curve_eval(self.curves[ci], t)
                if np.linalg.norm(p - self.vertices[vid]) > 1e-12:
                    raise ValueError(
                        f"curved edge {e}: endpoint {vid} off its curve by "
                        f"{np.linalg.norm(p - self.vertices[vid]):.2e}"
                    )
        # conformity: interior edges are shared by exactly two elements with
        # opposite traversal, boundary edges by exactly one
        count = np.zeros(self.n_edges, dtype=int)
        dirsum = np.zeros(self.n_edges, dtype=int)
        np.add.at(count, self.elem_edges.ravel(), 1)
        np.add.at(dirsum, self.elem_edges.ravel(),
                  self.elem_edge_dir.ravel().astype(int))
        interior = self.edge_tag == TAG_INTERIOR
        if np.any(count[interior] != 2) or np.any(dirsum[interior] != 0):
            raise ValueError("mesh is not conforming on interior edges")
        if np.any(count[~interior] != 1):
            raise ValueError("boundary edges must belong to exactly one element")
        self._check_regularity()

    def _check_regularity(self, rho: float = RHO_REGULARITY):
        """Shape-regularity checks; violations warn (the assumptions are
        sufficient for the theory, not necessary for the computation)."""
        length = np.empty(self.n_edges)
        straight = self.edge_curve < 0
        d = self.vertices[self.edge_v[:, 1]] - self.vertices[self.edge_v[:, 0]]
        length[straight] = np.hypot(d[straight, 0], d[straight, 1])
        for e in np.flatnonzero(~straight):
            length[e] = self._edge_length(int(e))
        short = length[self.elem_edges] < rho * self.elem_diameter[:, None]
        for i in np.flatnonzero(short.any(axis=1)):
            warnings.warn(f"element {i}: edge shorter than {rho} h_E", stacklevel=2)
        clearance = self._kernel_clearance()
        for i in np.flatnonzero(clearance < rho * self.elem_diameter):
            warnings.warn(
                f"element {i}: star-shapedness clearance below {rho} h_E",
                stacklevel=2,
            )

    def _kernel_clearance(self) -> np.ndarray:
        """Clearance of a candidate kernel point (the mass center) from the
        lines supporting the (chordal) edges, signed positively inward."""
        corners = self.vertices[self.elem_vertices]  # (n,4,2)
        nxt = np.roll(corners, -1, axis=1)
        t = nxt - corners
        nrm = np.hypot(t[..., 0], t[..., 1])
        inward = np.stack([-t[..., 1], t[..., 0]], axis=-1) / nrm[..., None]
        rel = self.elem_centroid[:, None, :] - corners
        return (rel * inward).sum(-1).min(axis=1)


# ----------------------------------------------------------------------
# generators
# ----------------------------------------------------------------------

def build_annulus_mesh(r0: float, r1: float, n_theta: int, n_r: int) -> Mesh:
    """Structured mesh of the annulus r0 < |x| < r1.

    n_theta x n_r curved quadrilaterals; edges on the two circles are
    circular arcs, all other edges are straight chords.
    """
    if not (r1 > r0 > 0.0):
        raise ValueError("need r1 > r0 > 0")
    if n_theta < 4 or n_r < 1:
        raise ValueError("need n_theta >= 4 and n_r >= 1")
    curves = [Circle((0.0, 0.0), r0), Circle((0.0, 0.0), r1)]
    radii = np.linspace(r0, r1, n_r + 1)
    theta = 2.0 * np.pi * np.arange(n_theta + 1) / n_theta

    nv = (n_r + 1) * n_theta
    vertices = np.empty((nv, 2))
    vertex_tag = np.full(nv, TAG_INTERIOR, dtype=np.int8)
    for j in range(n_r + 1):
        ids = j * n_theta + np.arange(n_theta)
        vertices[ids, 0] = radii[j] * np.cos(theta[:-1])
        vertices[ids, 1] = radii[j] * np.sin(theta[:-1])
        if j == 0:
            vertex_tag[ids] = TAG_GAMMA0
        elif j == n_r:
            vertex_tag[ids] = TAG_GAMMA

    edge_v, edge_curve, edge_t, edge_tag = [], [], [], []
    circ_edge = np.empty((n_r + 1, n_theta), dtype=int)
    rad_edge = np.empty((n_r, n_theta), dtype=int)
    for j in range(n_r + 1):
        for i in range(n_theta):
            circ_edge[j, i] = len(edge_v)
            edge_v.append((j * n_theta + i, j * n_theta + (i + 1) % n_theta))
            if j == 0:
                edge_curve.append(0)
                edge_tag.append(TAG_GAMMA0)
            elif j == n_r:
                edge_curve.append(1)
                edge_tag.append(TAG_GAMMA)
            else:
                edge_curve.append(-1)
                edge_tag.append(TAG_INTERIOR)
            edge_t.append((theta[i], theta[i + 1]))
    for j in range(n_r):
        for i in range(n_theta):
            rad_edge[j, i] = len(edge_v)
            edge_v.append((j * n_theta + i, (j + 1) * n_theta + i))
            edge_curve.append(-1)
            edge_tag.append(TAG_INTERIOR)
            edge_t.append((0.0, 1.0))

    # ccw traversal: radially out, along the outer ring, radially in, back
    # along the inner ring (reversed)
    elem_vertices, elem_edges, elem_edge_dir = [], [], []
    for j in range(n_r):
        for i in range(n_theta):
            ip = (i + 1) % n_theta
            elem_vertices.append(
                (j * n_theta + i, (j + 1) * n_theta + i,
                 (j + 1) * n_theta + ip, j * n_theta + ip)
            )
            elem_edges.append(
                (rad_edge[j, i], circ_edge[j + 1, i], rad_edge[j, ip], circ_edge[j, i])
            )
            elem_edge_dir.append((1, 1, -1, -1))

    return Mesh(vertices, vertex_tag, curves, edge_v, edge_curve,
                np.array(edge_t), edge_tag, elem_vertices, elem_edges,
                elem_edge_dir, level=0)


def build_square_ring_mesh(a0: float, a1: float, n_per_side: int, n_layers: int) -> Mesh:
    """Structured all-straight mesh of the square ring a0 < |x|_inf < a1.

    Vertex rings are scaled copies of each other, so radial edges follow
    the rays through the inner ring positions and all elements are
    trapezoids.
    """
    if not (a1 > a0 > 0.0):
        raise ValueError("need a1 > a0 > 0")
    if n_per_side < 1 or n_layers < 1:
        raise ValueError("need n_per_side >= 1 and n_layers >= 1")
    n_ring = 4 * n_per_side
    half = np.linspace(a0, a1, n_layers + 1)

    def ring_point(a, p):
        side, i = divmod(p, n_per_side)
        s = 2.0 * a * i / n_per_side
        if side == 0:
            return (-a + s, -a)
        if side == 1:
            return (a, -a + s)
        if side == 2:
            return (a - s, a)
        return (-a, a - s)

    nv = (n_layers + 1) * n_ring
    vertices = np.empty((nv, 2))
    vertex_tag = np.full(nv, TAG_INTERIOR, dtype=np.int8)
    for j in range(n_layers + 1):
        for p in range(n_ring):
            vertices[j * n_ring + p] = ring_point(half[j], p)
        tag = TAG_GAMMA0 if j == 0 else (TAG_GAMMA if j == n_layers else TAG_INTERIOR)
        vertex_tag[j * n_ring: (j + 1) * n_ring] = tag

    edge_v, edge_curve, edge_t, edge_tag = [], [], [], []
    ring_edge = np.empty((n_layers + 1, n_ring), dtype=int)
    rad_edge = np.empty((n_layers, n_ring), dtype=int)
    for j in range(n_layers + 1):
        tag = TAG_GAMMA0 if j == 0 else (TAG_GAMMA if j == n_layers else TAG_INTERIOR)
        for p in range(n_ring):
            ring_edge[j, p] = len(edge_v)
            edge_v.append((j * n_ring + p, j * n_ring + (p + 1) % n_ring))
            edge_curve.append(-1)
            edge_tag.append(tag)
            edge_t.append((0.0, 1.0))
    for j in range(n_layers):
        for p in range(n_ring):
            rad_edge[j, p] = len(edge_v)
            edge_v.append((j * n_ring + p, (j + 1) * n_ring + p))
            edge_curve.append(-1)
            edge_tag.append(TAG_INTERIOR)
            edge_t.append((0.0, 1.0))

    elem_vertices, elem_edges, elem_edge_dir = [], [], []
    for j in range(n_layers):
        for p in range(n_ring):
            pp = (p + 1) % n_ring
            elem_vertices.append(
                (j * n_ring + p, (j + 1) * n_ring + p,
                 (j + 1) * n_ring + pp, j * n_ring + pp)
            )
            elem_edges.append(
                (rad_edge[j, p], ring_edge[j + 1, p], rad_edge[j, pp], ring_edge[j, p])
            )
            elem_edge_dir.append((1, 1, -1, -1))

    return Mesh(vertices, vertex_tag, [], edge_v, edge_curve, np.array(edge_t),
                edge_tag, elem_vertices, elem_edges, elem_edge_dir, level=0)


def refine(m: Mesh) -> Mesh:
    """Conforming quadrisection: every quadrilateral is split into four by
    its edge midpoints and patch center; curved edges split at the
    parameter midpoint so new boundary vertices stay on the analytic
    curves."""
    verts = [m.vertices[i] for i in range(m.n_vertices)]
    vtags = list(m.vertex_tag)

    edge_mid = np.empty(m.n_edges, dtype=int)
    for e in range(m.n_edges):
        ci = m.edge_curve[e]
        if ci < 0:
            p = 0.5 * (m.vertices[m.edge_v[e, 0]] + m.vertices[m.edge_v[e, 1]])
        else:
            p = curve_eval(m.curves[ci], 0.5 * (m.edge_t[e, 0] + m.edge_t[e, 1]))
        edge_mid[e] = len(verts)
        verts.append(np.asarray(p))
        vtags.append(m.edge_tag[e])

    edge_v, edge_curve, edge_t, edge_tag = [], [], [], []
    edge_index: dict[tuple[int, int], int] = {}

    def add_edge(v0, v1, curve=-1, t=(0.0, 1.0), tag=TAG_INTERIOR):
        key = (min(v0, v1), max(v0, v1))
        if key in edge_index:
            return edge_index[key]
        idx = len(edge_v)
        edge_index[key] = idx
        if curve < 0:
            t = (0.0, 1.0)  # parameter slot is meaningful for curved edges only
        if v0 > v1:
            v0, v1 = v1, v0
            t = (t[1], t[0]) if curve >= 0 else t
        edge_v.append((v0, v1))
        edge_curve.append(curve)
        edge_t.append(t)
        edge_tag.append(tag)
        return idx

    def edge_dir(v0, v1):
        return 1 if v0 < v1 else -1

    # halves of the old edges, keyed by (old edge, endpoint vertex)
    for e in range(m.n_edges):
        v0, v1 = m.edge_v[e]
        vm = edge_mid[e]
        ci = m.edge_curve[e]
        t0, t1 = m.edge_t[e]
        tm = 0.5 * (t0 + t1)
        add_edge(v0, vm, ci, (t0, tm), m.edge_tag[e])
        add_edge(vm, v1, ci, (tm, t1), m.edge_tag[e])

    elem_vertices, elem_edges, elem_edge_dir = [], [], []
    for i in range(m.n_elements):
        patch = quadrature.transfinite_map(m, i)
        center_pt, _ = patch(np.array(0.5), np.array(0.5))
        vc = len(verts)
        verts.append(np.asarray(center_pt))
        vtags.append(TAG_INTERIOR)

        vids = m.elem_vertices[i]
        eids = m.elem_edges[i]
        mids = [edge_mid[e] for e in eids]
        for c in range(4):
            # child at corner c: (corner, mid of edge c, center, mid of edge c-1)
            quad = (int(vids[c]), int(mids[c]), vc, int(mids[(c + 3) % 4]))
            eds, dirs = [], []
            for a, b in zip(quad, quad[1:] + quad[:1]):
                e = add_edge(a, b)
                eds.append(e)
                dirs.append(edge_dir(a, b))
            elem_vertices.append(quad)
            elem_edges.append(tuple(eds))
            elem_edge_dir.append(tuple(dirs))

    return Mesh(np.array(verts), vtags, list(m.curves), edge_v, edge_curve,
                np.array(edge_t), edge_tag, elem_vertices, elem_edges,
                elem_edge_dir, level=m.level + 1)


# ----------------------------------------------------------------------
# degrees of freedom
# ----------------------------------------------------------------------

KIND_VERTEX = 0
KIND_EDGE = 1
KIND_MOMENT = 2


@dataclass
class DofMap:
    """Global enumeration of vertex, edge and moment degrees of freedom.

    Unknowns (interior and Gamma dofs) are numbered 0..n_unknown-1; the
    constrained Gamma0 dofs carry the Dirichlet datum and are numbered
    separately.  ``element_dofs`` returns indices in the extended numbering
    where constrained dof c appears as n_unknown + c.
    """

    k: int
    n_unknown: int
    n_constrained: int
    kind: np.ndarray            # extended numbering
    location: np.ndarray        # (n_ext, 2); NaN for moment dofs
    set_interior: np.ndarray    # unknown indices strictly inside Omega
    set_gamma: np.ndarray       # unknown indices on Gamma
    _vertex_dof: np.ndarray = field(repr=False, default=None)
    _edge_dof: np.ndarray = field(repr=False, default=None)
    _moment_dof: np.ndarray = field(repr=False, default=None)

    @property
    def n_ext(self):
        return self.n_unknown + self.n_constrained

    def element_dofs(self, m: Mesh, i: int) -> np.ndarray:
        """Local-to-extended-global dof indices of element i, ordered as
        vertices (ccw), per-edge internal points (along traversal), then
        internal moments."""
        k = self.k
        out = [self._vertex_dof[v] for v in m.elem_vertices[i]]
        for slot in range(4):
            e = m.elem_edges[i, slot]
            row = self._edge_dof[e]
            out.extend(row if m.elem_edge_dir[i, slot] > 0 else row[::-1])
        out.extend(self._moment_dof[i])
        return np.asarray(out, dtype=np.int64)

    def n_local(self) -> int:
        return 4 * self.k + (self.k * (self.k - 1)) // 2


def n_moment_dofs(k: int) -> int:
    return (k * (k - 1)) // 2


def build_dof_map(m: Mesh, k: int) -> DofMap:
    """Dof enumeration for degree k (supported: 1 and 2).

    Edge dofs sit at the internal Gauss-Lobatto points of the (k+1)-point
    rule: at their affine images on straight edges, at their parameter
    images through the edge curve on curved edges.
    """
    if k not in (1, 2):
        raise ValueError(f"unsupported degree k={k} (supported: 1, 2)")
    n_int = k - 1
    lob = quadrature.gauss_lobatto(k + 1)
    s_int = 0.5 * (lob.nodes[1:-1] + 1.0)  # internal nodes on [0, 1]

    n_unknown = 0
    n_constrained = 0
    ids = []

    def next_id(constrained):
        nonlocal n_unknown, n_constrained
        if constrained:
            n_constrained += 1
            return -n_constrained  # provisional; fixed up below
        n_unknown += 1
        return n_unknown - 1

    vertex_dof = np.empty(m.n_vertices, dtype=np.int64)
    for v in range(m.n_vertices):
        vertex_dof[v] = next_id(m.vertex_tag[v] == TAG_GAMMA0)
    edge_dof = np.empty((m.n_edges, n_int), dtype=np.int64)
    for e in range(m.n_edges):
        for a in range(n_int):
            edge_dof[e, a] = next_id(m.edge_tag[e] == TAG_GAMMA0)
    moment_dof = np.empty((m.n_elements, n_moment_dofs(k)), dtype=np.int64)
    for i in range(m.n_elements):
        for a in range(n_moment_dofs(k)):
            moment_dof[i, a] = next_id(False)

    # fix up constrained ids into [n_unknown, n_unknown + n_constrained)
    def fixup(arr):
        neg = arr < 0
        arr[neg] = n_unknown + (-arr[neg] - 1)

    fixup(vertex_dof)
    fixup(edge_dof)
    fixup(moment_dof)

    n_ext = n_unknown + n_constrained
    kind = np.empty(n_ext, dtype=np.int8)
    location = np.full((n_ext, 2), np.nan)
    kind[vertex_dof] = KIND_VERTEX
    location[vertex_dof] = m.vertices
    for e in range(m.n_edges):
        if n_int == 0:
            break
        ev, _ = m.edge_param(e)
        pts = ev(s_int)
        kind[edge_dof[e]] = KIND_EDGE
        location[edge_dof[e]] = pts
    kind[moment_dof.ravel()] = KIND_MOMENT

    on_gamma = np.zeros(n_unknown, dtype=bool)
    gv = vertex_dof[m.vertex_tag == TAG_GAMMA]
    on_gamma[gv[gv < n_unknown]] = True
    for e in range(m.n_edges):
        if m.edge_tag[e] == TAG_GAMMA and n_int:
            on_gamma[edge_dof[e]] = True
    set_gamma = np.flatnonzero(on_gamma)
    set_interior = np.flatnonzero(~on_gamma)

    return DofMap(
        k=k,
        n_unknown=n_unknown,
        n_constrained=n_constrained,
        kind=kind,
        location=location,
        set_interior=set_interior,
        set_gamma=set_gamma,
        _vertex_dof=vertex_dof,
        _edge_dof=edge_dof,
        _moment_dof=moment_dof,
    )


# ----------------------------------------------------------------------
# text format
# ----------------------------------------------------------------------

def write_mesh(m: Mesh, path):
    """Write the line-oriented text format (17 significant digits)."""
    f = lambda x: f"{x:.17g}"
    lines = ["mesh v1", f"level {m.level}", f"curves {len(m.curves)}"]
    for c in m.curves:
        if isinstance(c, Circle):
            lines.append(
                f"circle {f(c.center[0])} {f(c.center[1])} {f(c.radius)} {c.orientation}"
            )
        else:
            lines.append(f"segment {f(c.a[0])} {f(c.a[1])} {f(c.b[0])} {f(c.b[1])}")
    lines.append(f"vertices {m.n_vertices}")
    for v in range(m.n_vertices):
        x, y = m.vertices[v]
        lines.append(f"{v} {f(x)} {f(y)} {_TAG_NAMES[int(m.vertex_tag[v])]}")
    lines.append(f"edges {m.n_edges}")
    for e in range(m.n_edges):
        v0, v1 = m.edge_v[e]
        tag = _TAG_NAMES[int(m.edge_tag[e])]
        if m.edge_curve[e] < 0:
            lines.append(f"{e} {v0} {v1} straight {tag}")
        else:
            t0, t1 = m.edge_t[e]
            lines.append(
                f"{e} {v0} {v1} curved {m.edge_curve[e]} {f(t0)} {f(t1)} {tag}"
            )
    lines.append(f"elements {m.n_elements}")
    for i in range(m.n_elements):
        vs = " ".join(str(v) for v in m.elem_vertices[i])
        lines.append(f"{i} {len(m.elem_vertices[i])} {vs}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Read the text format back; raises MeshFormatError with the offending
    line number on malformed input."""
    with open(path) as fh:
        raw = fh.read().splitlines()
    pos = 0

    def fail(msg):
        raise MeshFormatError(f"{path}: line {pos}: {msg}")

    def next_line():
        nonlocal pos
        while pos < len(raw):
            pos += 1
            s = raw[pos - 1].strip()
            if s:
                return s
        fail("unexpected end of file")

    def expect_count(keyword):
        s = next_line().split()
        if len(s) != 2 or s[0] != keyword:
            fail(f"expected '{keyword} <n>'")
        try:
            return int(s[1])
        except ValueError:
            fail(f"bad count {s[1]!r}")

    if next_line() != "mesh v1":
        fail("missing 'mesh v1' header")
    level = 0
    s = next_line().split()
    if s[0] == "level":
        try:
            level = int(s[1])
        except (IndexError, ValueError):
            fail("bad level record")
        nc = expect_count("curves")
    elif s[0] == "curves" and len(s) == 2:
        nc = int(s[1])
    else:
        fail("expected 'level' or 'curves'")

    curves = []
    for _ in range(nc):
        s = next_line().split()
        try:
            if s[0] == "circle" and len(s) == 5:
                curves.append(Circle((float(s[1]), float(s[2])), float(s[3]), s[4]))
            elif s[0] == "segment" and len(s) == 5:
                curves.append(Segment((float(s[1]), float(s[2])), (float(s[3]), float(s[4]))))
            else:
                fail(f"bad curve record {raw[pos-1]!r}")
        except (ValueError, IndexError):
            fail(f"bad curve record {raw[pos-1]!r}")

    nv = expect_count("vertices")
    vertices = np.empty((nv, 2))
    vertex_tag = np.empty(nv, dtype=np.int8)
    for n in range(nv):
        s = next_line().split()
        if len(s) != 4:
            fail("vertex record needs 'id x y tag'")
        try:
            vid = int(s[0])
            vertices[vid] = (float(s[1]), float(s[2]))
            vertex_tag[vid] = _TAG_VALUES[s[3]]
        except (ValueError, KeyError, IndexError):
            fail(f"bad vertex record {raw[pos-1]!r}")

    ne = expect_count("edges")
    edge_v = np.empty((ne, 2), dtype=np.int64)
    edge_curve = np.full(ne, -1, dtype=np.int64)
    edge_t = np.zeros((ne, 2))
    edge_t[:, 1] = 1.0
    edge_tag = np.empty(ne, dtype=np.int8)
    for n in range(ne):
        s = next_line().split()
        try:
            eid = int(s[0])
            v0, v1 = int(s[1]), int(s[2])
            if not (0 <= v0 < nv and 0 <= v1 < nv):
                fail(f"edge {eid} references unknown vertex")
            edge_v[eid] = (v0, v1)
            if s[3] == "straight" and len(s) == 5:
                edge_tag[eid] = _TAG_VALUES[s[4]]
            elif s[3] == "curved" and len(s) == 8:
                ci = int(s[4])
                if not 0 <= ci < len(curves):
                    fail(f"edge {eid} references unknown curve {ci}")
                edge_curve[eid] = ci
                edge_t[eid] = (float(s[5]), float(s[6]))
                edge_tag[eid] = _TAG_VALUES[s[7]]
            else:
                fail(f"bad edge record {raw[pos-1]!r}")
        except MeshFormatError:
            raise
        except (ValueError, KeyError, IndexError):
            fail(f"bad edge record {raw[pos-1]!r}")

    nel = expect_count("elements")
    elem_vertices = np.empty((nel, 4), dtype=np.int64)
    edge_index = {}
    for e in range(ne):
        key = (min(edge_v[e]), max(edge_v[e]))
        edge_index[key] = e
    elem_edges = np.empty((nel, 4), dtype=np.int64)
    elem_edge_dir = np.empty((nel, 4), dtype=np.int8)
    for n in range(nel):
        s = next_line().split()
        try:
            eid = int(s[0])
            cnt = int(s[1])
            if cnt != 4 or len(s) != 2 + cnt:
                fail(f"element {eid}: only 4-vertex elements are supported")
            vs = [int(t) for t in s[2:]]
        except MeshFormatError:
            raise
        except (ValueError, IndexError):
            fail(f"bad element record {raw[pos-1]!r}")
        if any(not 0 <= v < nv for v in vs):
            fail(f"element {eid} references unknown vertex")
        elem_vertices[eid] = vs
        for slot in range(4):
            a, b = vs[slot], vs[(slot + 1) % 4]
            key = (min(a, b), max(a, b))
            if key not in edge_index:
                fail(f"element {eid}: side {a}-{b} is not a mesh edge")
            e = edge_index[key]
            elem_edges[eid, slot] = e
            elem_edge_dir[eid, slot] = 1 if edge_v[e][0] == a else -1

    return Mesh(vertices, vertex_tag, curves, edge_v, edge_curve, edge_t,
                edge_tag, elem_vertices, elem_edges, elem_edge_dir, level=level)
