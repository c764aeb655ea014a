"""P1 finite elements for div(gamma grad u) = 0 with Dirichlet data on the
outer boundary; element-wise gradients and one-sided interface traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import MeshIntegrityError, SolverError
from .geometry import PiecewiseConductivity
from .mesh import TriMesh

RESIDUAL_TOL = 1e-10

# Constrained-Delaunay meshes with discontinuous gamma are not M-matrices, so
# the discrete maximum principle holds only up to a small overshoot.
MAX_PRINCIPLE_SLACK = 1e-8


@dataclass(frozen=True)
class BoundaryTrace:
    """Nodal values on the outer boundary, ordered by arclength."""

    values: np.ndarray
    arclength: np.ndarray
    total_length: float

    def __post_init__(self):
        if len(self.values) != len(self.arclength):
            raise ValueError("trace values and arclength coordinates disagree in length")


def trace_from_function(mesh: TriMesh, fn) -> BoundaryTrace:
    pts = mesh.nodes[mesh.boundary_nodes]
    return BoundaryTrace(np.asarray([fn(x, y) for x, y in pts], float),
                         mesh.boundary_arclength, mesh.boundary_length)


def fourier_trace(mesh: TriMesh, mode: int) -> BoundaryTrace:
    """Arclength Fourier probing trace: 0 -> 1, 2j-1 -> cos, 2j -> sin."""
    s = mesh.boundary_arclength
    L = mesh.boundary_length
    if mode == 0:
        vals = np.ones_like(s)
    else:
        j = (mode + 1) // 2
        arg = 2.0 * np.pi * j * s / L
        vals = np.cos(arg) if mode % 2 == 1 else np.sin(arg)
    return BoundaryTrace(vals, s, L)


def trace_from_values(mesh: TriMesh, values) -> BoundaryTrace:
    v = np.asarray(values, float)
    if len(v) != len(mesh.boundary_nodes):
        raise ValueError("value count does not match boundary node count")
    return BoundaryTrace(v, mesh.boundary_arclength, mesh.boundary_length)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def p1_gradients(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    """Per-triangle constant gradient of a P1 field."""
    t = mesh.triangles
    p0, p1, p2 = mesh.nodes[t[:, 0]], mesh.nodes[t[:, 1]], mesh.nodes[t[:, 2]]
    e1, e2 = p1 - p0, p2 - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    du1 = u[t[:, 1]] - u[t[:, 0]]
    du2 = u[t[:, 2]] - u[t[:, 0]]
    gx = (e2[:, 1] * du1 - e1[:, 1] * du2) / det
    gy = (-e2[:, 0] * du1 + e1[:, 0] * du2) / det
    return np.column_stack([gx, gy])


def _element_matrices(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """(b, c) coefficient arrays of the P1 basis gradients, shape (m, 3)."""
    t = mesh.triangles
    x = mesh.nodes[:, 0][t]
    y = mesh.nodes[:, 1][t]
    b = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]])
    c = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]])
    return b, c


def assemble_stiffness(mesh: TriMesh, cond) -> sp.csr_matrix:
    """Neumann stiffness matrix for gamma = cond (PiecewiseConductivity or
    per-triangle array); symmetric PSD with constants in the kernel."""
    if isinstance(cond, PiecewiseConductivity):
        gamma = mesh.gamma(cond)
    else:
        gamma = np.asarray(cond, float)
        if gamma.shape != (len(mesh.triangles),):
            raise MeshIntegrityError("per-triangle conductivity has the wrong length")
    b, c = _element_matrices(mesh)
    coef = gamma / (4.0 * mesh.areas)
    t = mesh.triangles
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(t[:, i])
            cols.append(t[:, j])
            vals.append(coef * (b[:, i] * b[:, j] + c[:, i] * c[:, j]))
    K = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mesh.n_nodes, mesh.n_nodes))
    return K.tocsr()


class DirichletSolver:
    """Factorized interior block, reusable across many boundary traces."""

    def __init__(self, mesh: TriMesh, cond):
        self.mesh = mesh
        self.cond = cond if isinstance(cond, PiecewiseConductivity) else None
        self.gamma = mesh.gamma(cond) if isinstance(cond, PiecewiseConductivity) \
            else np.asarray(cond, float)
        self.K = assemble_stiffness(mesh, self.gamma)
        n = mesh.n_nodes
        self.bnodes = mesh.boundary_nodes
        mask = np.ones(n, dtype=bool)
        mask[self.bnodes] = False
        self.inodes = np.where(mask)[0]
        Kcsc = self.K.tocsc()
        self.K_ii = Kcsc[self.inodes][:, self.inodes]
        self.K_ib = Kcsc[self.inodes][:, self.bnodes]
        try:
            self.lu = splu(self.K_ii.tocsc())
        except RuntimeError as exc:  # pragma: no cover - should not happen
            raise SolverError(f"interior-block factorization failed: {exc}") from exc

    def extend(self, f_b: np.ndarray, rhs_interior: np.ndarray | None = None) -> np.ndarray:
        """Full nodal field with the given boundary values (columns allowed)."""
        f_b = np.asarray(f_b, float)
        rhs = -self.K_ib @ f_b
        if rhs_interior is not None:
            rhs = rhs + rhs_interior
        u_i = self.lu.solve(rhs)
        u = np.zeros((self.mesh.n_nodes,) + f_b.shape[1:])
        u[self.bnodes] = f_b
        u[self.inodes] = u_i
        return u

    def residual(self, u: np.ndarray, rhs_interior: np.ndarray | None = None) -> float:
        r = self.K @ u
        if rhs_interior is not None:
            ri = r[self.inodes] - rhs_interior
        else:
            ri = r[self.inodes]
        scale = float(np.abs(self.K @ u).max()) + float(np.abs(u).max()) + 1e-300
        return float(np.abs(ri).max()) / scale


@dataclass(frozen=True)
class FemSolution:
    """Discrete solution with cached per-triangle gradients."""

    mesh: TriMesh
    gamma: np.ndarray
    trace: BoundaryTrace
    u: np.ndarray
    gradients: np.ndarray
    residual: float
    max_principle_defect: float

    def energy(self) -> float:
        """Dirichlet energy integral of gamma |grad u|^2."""
        g2 = (self.gradients ** 2).sum(axis=1)
        return float(np.sum(self.gamma * g2 * self.mesh.areas))


def solve_dirichlet(mesh: TriMesh, cond, f: BoundaryTrace,
                    solver: DirichletSolver | None = None,
                    max_principle_slack: float = MAX_PRINCIPLE_SLACK) -> FemSolution:
    """Solve the transmission problem with Dirichlet trace f.

    Checks the constrained residual and the discrete maximum principle; a
    violation beyond the allowed slack raises SolverError.
    """
    if not np.all(np.isfinite(f.values)):
        raise SolverError("boundary trace contains non-finite values")
    s = solver if solver is not None else DirichletSolver(mesh, cond)
    u = s.extend(f.values)
    res = s.residual(u)
    if res > RESIDUAL_TOL:
        raise SolverError(f"constrained residual {res:.2e} above {RESIDUAL_TOL:.0e}")
    fmin, fmax = float(f.values.min()), float(f.values.max())
    span = max(fmax - fmin, abs(fmax), 1e-300)
    defect = max(0.0, float(u.max()) - fmax, fmin - float(u.min()))
    if max_principle_slack is not None and defect > max_principle_slack * span:
        raise SolverError(
            f"discrete maximum principle violated by {defect:.2e} (span {span:.2e})")
    return FemSolution(mesh, s.gamma, f, u, p1_gradients(mesh, u), res, defect)


def interface_gradients(sol: FemSolution, side: str, which: int = 0) -> np.ndarray:
    """One-sided gradient traces on the interface edges of one inclusion.

    side is "inside" or "outside"; values are the adjacent triangle constants.
    """
    edges = sol.mesh.interface_edges[which]
    if side == "inside":
        tris = edges.tri_in
    elif side == "outside":
        tris = edges.tri_out
    else:
        raise ValueError("side must be 'inside' or 'outside'")
    if np.any(tris < 0):
        raise MeshIntegrityError("interface edge missing a neighbor triangle")
    return sol.gradients[tris]


def tangential_mismatch(sol: FemSolution, which: int = 0) -> float:
    """Max difference of the tangential gradient across the interface (O(h))."""
    edges = sol.mesh.interface_edges[which]
    gin = interface_gradients(sol, "inside", which)
    gout = interface_gradients(sol, "outside", which)
    return float(np.abs(np.einsum("ij,ij->i", gin - gout, edges.tangent)).max()) \
        if len(edges) else 0.0


def boundary_flux_pairing(solver: DirichletSolver, u: np.ndarray,
                          psi_b: np.ndarray) -> float:
    """Duality pairing <Lambda(phi), psi> evaluated as psi^T (K u) on the boundary."""
    return float(psi_b @ (solver.K @ u)[solver.bnodes])
