"""Coupled interior/boundary solver: Dirichlet lifting, discrete load,
the block linear system, its direct solution, and evaluation of the
radiated field outside the artificial boundary."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import cvem
from .bem import BemMatrices, BoundaryMesh, QuadPolicy, assemble_bem, boundary_mesh
from .mesh import DofMap, KIND_MOMENT, Mesh, build_dof_map
from .specfun import hankel1

__all__ = [
    "ProblemSpec",
    "SolveResult",
    "dirichlet_lift",
    "discrete_load",
    "build_system",
    "solve",
    "solve_helmholtz",
    "solve_interior_laplace",
    "evaluate_exterior",
]


@dataclass
class ProblemSpec:
    """Scattering problem: wavenumber, Dirichlet datum on the obstacle
    boundary, optional interior source, and the discretization degree."""

    kappa: float
    g: callable
    f: callable = None
    k: int = 1

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")


@dataclass
class SolveResult:
    """Solution of the coupled system.

    ``u`` is the full dof vector in the extended numbering (unknowns
    followed by the lifted Dirichlet values), ``lam`` the trace-flux dofs
    in the cyclic boundary ordering of ``boundary``."""

    u: np.ndarray
    lam: np.ndarray
    residual_norm: float
    rhs_norm: float
    n_unknown: int
    n_gamma: int
    boundary: BoundaryMesh


def dirichlet_lift(dm: DofMap, g) -> np.ndarray:
    """Datum evaluated at the constrained (obstacle-boundary) dof points."""
    n = dm.n_unknown
    locs = dm.location[n:]
    if np.any(~np.isfinite(locs)):
        raise ValueError("constrained dofs must be point evaluations")
    if dm.n_constrained == 0:
        return np.zeros(0, dtype=complex)
    return np.asarray(g(locs), dtype=complex)


def discrete_load(m: Mesh, dm: DofMap, k: int, f) -> np.ndarray:
    """Load vector of the source term against the degree-1 L2 projections
    of the basis functions; zero when f is None."""
    out = np.zeros(dm.n_ext, dtype=complex)
    if f is None:
        return out[: dm.n_unknown]
    idx1 = 3  # dim P_1
    for i in range(m.n_elements):
        ops = cvem.compute_projectors(m, i, k)
        nmom = ops.D.shape[0] - 4 * k
        # moments of the basis against the degree <= 1 monomials
        C1 = np.empty((idx1, ops.D.shape[0]))
        if nmom:
            C1[:nmom] = 0.0
            C1[np.arange(nmom), ops.D.shape[0] - nmom + np.arange(nmom)] = ops.area
            C1[nmom:idx1] = (ops.H @ ops.pnabla)[nmom:idx1]
        else:
            C1[:] = (ops.H @ ops.pnabla)[:idx1]
        p1 = np.linalg.solve(ops.H[:idx1, :idx1], C1)  # dofs -> P_1 coeffs
        vals = cvem.monomial_values(ops.quad_points, ops.centroid, ops.h,
                                    cvem.monomial_indices(1))
        fm = (ops.quad_weights * np.asarray(f(ops.quad_points))) @ vals
        out[dm.element_dofs(m, i)] += p1.T @ fm
    return out[: dm.n_unknown]


def build_system(blocks: cvem.GlobalBlocks, bem_mats: BemMatrices,
                 bm: BoundaryMesh, kappa: float, load: np.ndarray,
                 lift_vals: np.ndarray):
    """Assemble the square complex block system and right-hand side.

    Row layout: the interior/trace unknowns, then the non-reflecting
    condition rows; column layout: the same unknowns, then the trace
    fluxes in the boundary ordering."""
    n = blocks.A.shape[0]
    ng = bm.n_dofs
    if not np.array_equal(blocks.gamma_dofs, bm.gamma_dofs):
        raise ValueError("FEM blocks and boundary mesh use different orderings")
    helm = (blocks.A - kappa**2 * blocks.M).astype(complex)

    # trace-flux coupling enters only the rows of the boundary dofs
    Q = blocks.Q_gamma.tocoo()
    coupling = sp.coo_matrix(
        (-Q.data.astype(complex), (bm.gamma_dofs[Q.row], Q.col)), shape=(n, ng)
    )
    half_q_minus_k = 0.5 * blocks.Q_gamma.toarray() - bem_mats.K
    cols = np.tile(bm.gamma_dofs, ng)
    rows = np.repeat(np.arange(ng), ng)
    nrbc_left = sp.coo_matrix(
        (half_q_minus_k.ravel(), (rows, cols)), shape=(ng, n)
    )
    system = sp.bmat(
        [[helm, coupling], [nrbc_left, sp.coo_matrix(bem_mats.V)]], format="csc"
    )
    rhs = np.zeros(n + ng, dtype=complex)
    rhs[:n] = load - (blocks.lift_A - kappa**2 * blocks.lift_M) @ lift_vals
    return system, rhs


def solve(system, rhs) -> tuple[np.ndarray, float]:
    """Direct sparse LU solve; returns the solution and residual norm.

    A numerically singular factorization reports the smallest pivot, which
    signals an interior resonance or a broken mesh."""
    try:
        lu = spla.splu(system.tocsc())
    except RuntimeError as exc:
        raise RuntimeError(f"singular coupled system: {exc}") from exc
    umin = np.abs(lu.U.diagonal()).min()
    if umin == 0.0 or not np.isfinite(umin):
        raise RuntimeError(f"singular coupled system (pivot magnitude {umin})")
    x = lu.solve(rhs)
    res = float(np.linalg.norm(system @ x - rhs))
    return x, res


# above this size the monolithic factorization of the hybrid sparse/dense
# system costs more memory than eliminating the interior block first
_SCHUR_THRESHOLD = 250_000


def solve_coupled(blocks: cvem.GlobalBlocks, bem_mats: BemMatrices,
                  bm: BoundaryMesh, kappa: float, load: np.ndarray,
                  lift_vals: np.ndarray, method: str = "auto"):
    """Solve the coupled system; returns (u_unknowns, lam, residual, |rhs|).

    ``schur`` factorizes only the interior block and forms the dense
    boundary Schur complement, which keeps the fill-in of the sparse
    factorization free of the dense coupling rows and is the only option
    that fits large meshes in memory; ``monolithic`` factorizes the full
    block matrix."""
    n = blocks.A.shape[0]
    ng = bm.n_dofs
    if method == "auto":
        method = "schur" if n > _SCHUR_THRESHOLD else "monolithic"
    rhs_u = load - (blocks.lift_A - kappa**2 * blocks.lift_M) @ lift_vals
    if method == "monolithic":
        system, rhs = build_system(blocks, bem_mats, bm, kappa, load, lift_vals)
        x, res = solve(system, rhs)
        return x[:n], x[n:], res, float(np.linalg.norm(rhs))

    F = (blocks.A - kappa**2 * blocks.M).astype(complex).tocsc()
    Q = blocks.Q_gamma.tocoo()
    C = sp.coo_matrix(
        (-Q.data.astype(complex), (bm.gamma_dofs[Q.row], Q.col)), shape=(n, ng)
    ).tocsc()
    Brow = sp.coo_matrix(
        (
            (0.5 * blocks.Q_gamma.toarray() - bem_mats.K).ravel(),
            (np.repeat(np.arange(ng), ng), np.tile(bm.gamma_dofs, ng)),
        ),
        shape=(ng, n),
    ).tocsr()
    lu = spla.splu(F, permc_spec="MMD_AT_PLUS_A")
    if np.abs(lu.U.diagonal()).min() == 0.0:
        raise RuntimeError("singular interior block (resonant wavenumber?)")
    S = bem_mats.V.copy()
    chunk = max(1, min(ng, int(2e7 // max(n, 1)) or 1))
    for j0 in range(0, ng, chunk):
        T = lu.solve(C[:, j0:j0 + chunk].toarray())
        S[:, j0:j0 + chunk] -= Brow @ T
    y = lu.solve(rhs_u)
    lam = np.linalg.solve(S, -(Brow @ y))
    u = lu.solve(rhs_u - C @ lam)
    res = float(np.sqrt(
        np.linalg.norm(F @ u + C @ lam - rhs_u) ** 2
        + np.linalg.norm(Brow @ u + bem_mats.V @ lam) ** 2
    ))
    rhs_norm = float(np.linalg.norm(rhs_u))
    return u, lam, res, rhs_norm


def solve_helmholtz(m: Mesh, spec: ProblemSpec, policy: QuadPolicy | None = None,
                    method: str = "auto") -> SolveResult:
    """End-to-end driver: dofs, FEM and BEM assembly, lifting, solve."""
    dm = build_dof_map(m, spec.k)
    bm = boundary_mesh(m, dm)
    blocks = cvem.assemble_fem_blocks(m, dm, spec.k, gamma_order=bm.gamma_dofs)
    bem_mats = assemble_bem(bm, spec.kappa, policy)
    load = discrete_load(m, dm, spec.k, spec.f)
    lift = dirichlet_lift(dm, spec.g)
    xu, lam, res, rhs_norm = solve_coupled(blocks, bem_mats, bm, spec.kappa,
                                           load, lift, method)
    u = np.concatenate([xu, lift])
    return SolveResult(
        u=u, lam=lam, residual_norm=res, rhs_norm=rhs_norm,
        n_unknown=dm.n_unknown, n_gamma=bm.n_dofs, boundary=bm,
    )


def solve_interior_laplace(m: Mesh, dm: DofMap, g) -> np.ndarray:
    """Pure interior Laplace solve with the datum imposed on both
    boundaries (patch-test support; wavenumber terms off).

    Returns the full dof vector in the extended numbering; point dofs on
    both boundaries carry g, interior moments are solved for."""
    k = dm.k
    blocks = cvem.assemble_fem_blocks(m, dm, k)
    n = dm.n_unknown
    vals = np.zeros(dm.n_ext, dtype=complex)
    vals[n:] = dirichlet_lift(dm, g)
    gm = dm.set_gamma
    it = dm.set_interior
    locs = dm.location[gm]
    vals[gm] = np.asarray(g(locs), dtype=complex)
    A = blocks.A
    rhs = -(A[it][:, gm] @ vals[gm]) - (blocks.lift_A[it] @ vals[n:])
    x = spla.spsolve(A[it][:, it].tocsc(), rhs)
    vals[it] = x
    return vals


def evaluate_exterior(u_gamma: np.ndarray, lam: np.ndarray, bm: BoundaryMesh,
                      kappa: float, points) -> np.ndarray:
    """Radiated field outside the artificial boundary from its traces:
    u(x) = -int_G G(x,.) lam + int_G dG/dn_y(x,.) u, panel-wise 9-point
    Gauss (the kernels are smooth off the boundary)."""
    from . import quadrature

    points = np.atleast_2d(np.asarray(points, dtype=float))
    g9 = quadrature.shifted(quadrature.gauss_legendre(9), 0.0, 1.0)
    nodes = 0.5 * (quadrature.gauss_lobatto(bm.k + 1).nodes + 1.0)
    from .bem import _lagrange_at

    trace = _lagrange_at(nodes, g9.nodes)  # (k+1, 9)
    out = np.zeros(len(points), dtype=complex)
    min_dist = np.inf
    angle_sum = np.zeros(len(points))
    for p in range(bm.n_panels):
        y = bm.evals[p](g9.nodes)
        tg = bm.derivs[p](g9.nodes)
        speed = np.hypot(tg[:, 0], tg[:, 1])
        nrm = np.stack([tg[:, 1], -tg[:, 0]], axis=1) / speed[:, None]
        w = g9.weights * speed
        uv = trace.T @ u_gamma[bm.panel_dofs[p]]
        lv = trace.T @ lam[bm.panel_dofs[p]]
        d = points[:, None, :] - y[None, :, :]
        r = np.hypot(d[..., 0], d[..., 1])
        min_dist = min(min_dist, float(r.min()))
        rn = d[..., 0] * nrm[:, 0] + d[..., 1] * nrm[:, 1]
        G = 0.25j * hankel1(0, kappa * r)
        dG = 0.25j * kappa * (rn / r) * hankel1(1, kappa * r)
        out += (-G * lv + dG * uv) @ w
        # winding-number accumulation to detect points inside the boundary
        a0 = np.arctan2(points[:, 1] - bm.evals[p](0.0)[1],
                        points[:, 0] - bm.evals[p](0.0)[0])
        a1 = np.arctan2(points[:, 1] - bm.evals[p](1.0)[1],
                        points[:, 0] - bm.evals[p](1.0)[0])
        angle_sum += np.mod(a0 - a1 + np.pi, 2 * np.pi) - np.pi
    inside = np.abs(angle_sum) > np.pi
    if np.any(inside):
        raise ValueError("evaluation points must lie strictly outside the "
                         "artificial boundary")
    h_gamma = bm.arclength.max()
    if min_dist < 0.05 * h_gamma:
        warnings.warn("evaluation point close to the artificial boundary; "
                      "accuracy of the panel rule degrades", stacklevel=2)
    return out
