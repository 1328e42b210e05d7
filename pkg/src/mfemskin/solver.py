"""Condensed mixed-elasticity solve with rig-supplied rotations.

With per-element rotations R_k fixed by the rig, the mixed problem

    min_{s,x}  sum_k w_k Psi(s_k)  +  (k_s/2) ||P x - x_p||^2  -  f.x
    s.t.       B_k x = [R_k] s_k

reduces by block elimination to one sparse SPD solve per frame:

    (H_x + G^T H_s G) x = b_x - G^T b_s,      G = [R]^+ B

where [R_k] is the 9x6 map s -> vec(R_k mat(s)) and [R_k]^+ its closed-form
left pseudoinverse.  [R_k]^+ applied to vec(F) yields the 6-vector of
sym(R_k^T F), so the constraint binds only the component of F reachable as
R_k times a symmetric matrix; the skew remainder ||Bx - [R]s|| is reported,
not enforced (it measures rotation-cluster disagreement, visible at cluster
boundaries).  A full saddle-point solve over (s, x, multipliers) with that
same projected constraint is kept as an independent validation oracle; it
must match the condensed path to machine precision.

Solver: SuperLU with COLAMD ordering.  The assembled CSR index pattern is
precomputed once per scene; SuperLU re-runs its own analysis each numeric
refactor (no CHOLMOD in the stack), which is well inside the frame budget.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import DefGradOperator, TetMesh, build_defgrad_operator
from .rig import RotationClustering
from .symvec import SYM_IDENTITY, SYM_WEIGHTS, sym_basis

ORTHONORMAL_TOL = 1e-9
DENSE_ORACLE_LIMIT = 2000
DEFAULT_ORACLE_LIMIT = 20000


class SolverError(Exception):
    """Numerical failure in assembly or solve."""


class SingularSystemError(SolverError):
    """System not positive definite; usually insufficient pinning."""


# ---------------------------------------------------------------------------
# Rotation blocks
# ---------------------------------------------------------------------------

@dataclass
class RotationBlocks:
    """Per-element 9x6 rotation blocks and their left pseudoinverses.

    blocks[k] maps a symmetric 6-vector to vec9(R_k * mat(s)); pinv[k] is
    ([R_k]^T [R_k])^-1 [R_k]^T = diag(1,1,1,2,2,2)^-1 [R_k]^T, exact because
    [R_k]^T [R_k] = diag(1,1,1,2,2,2) for any orthonormal R_k.
    """

    rotations: np.ndarray  # (m, 3, 3)
    blocks: np.ndarray  # (m, 9, 6)
    pinv: np.ndarray  # (m, 6, 9)

    @property
    def num_elements(self) -> int:
        return len(self.blocks)


def check_orthonormal(rotations: np.ndarray, tol: float = ORTHONORMAL_TOL) -> None:
    R = np.asarray(rotations)
    gram = np.einsum("kij,kil->kjl", R, R)
    err = np.abs(gram - np.eye(3)).max(axis=(1, 2))
    if (err > tol).any():
        k = int(np.argmax(err))
        raise SolverError(
            f"rotation {k} is not orthonormal (||R^T R - I||_inf = {err[k]:.3e})"
        )
    if (np.linalg.det(R) < 0).any():
        raise SolverError("rotation with negative determinant (reflection) supplied")


def rotation_blocks_from_rotations(rotations: np.ndarray) -> RotationBlocks:
    """Build [R_k] and [R_k]^+ for per-element rotations (m, 3, 3)."""
    rotations = np.ascontiguousarray(rotations, dtype=np.float64)
    check_orthonormal(rotations)
    m = len(rotations)
    E = sym_basis()  # (6, 3, 3)
    blocks = np.empty((m, 9, 6))
    for a in range(6):
        blocks[:, :, a] = (rotations @ E[a]).reshape(m, 9)
    pinv = blocks.transpose(0, 2, 1) / SYM_WEIGHTS[None, :, None]
    return RotationBlocks(rotations=rotations, blocks=blocks, pinv=pinv)


def build_rotation_blocks(
    clustering: RotationClustering, bone_rotations: np.ndarray
) -> RotationBlocks:
    """Expand per-bone rotations through the clustering into element blocks."""
    bone_rotations = np.asarray(bone_rotations, dtype=np.float64)
    check_orthonormal(bone_rotations)
    return rotation_blocks_from_rotations(
        clustering.element_rotations(bone_rotations)
    )


# ---------------------------------------------------------------------------
# Constraints
# ---------------------------------------------------------------------------

@dataclass
class ConstraintSystem:
    """Pin penalty (k_s/2)||Px - x_p||^2 plus optional constant loads.

    P is a pure selection operator, so H_x = k_s P^T P is diagonal with k_s on
    the pinned dofs.  targets holds x_p for the current pose.
    """

    num_vertices: int
    pin_indices: np.ndarray  # (p,) vertex indices
    stiffness: float
    targets: np.ndarray  # (3p,)
    external_force: np.ndarray | None = None  # (3n,)

    def __post_init__(self):
        self.pin_indices = np.asarray(self.pin_indices, dtype=np.int64)
        self.targets = np.asarray(self.targets, dtype=np.float64).ravel()
        if self.targets.size != 3 * len(self.pin_indices):
            raise SolverError("targets must supply 3 components per pin")
        if self.external_force is not None:
            self.external_force = np.asarray(self.external_force, dtype=np.float64).ravel()
            if self.external_force.size != 3 * self.num_vertices:
                raise SolverError("external force must be a full 3n vector")

    @property
    def pinned_dofs(self) -> np.ndarray:
        return (3 * self.pin_indices[:, None] + np.arange(3)).ravel()

    def hessian_diagonal(self) -> np.ndarray:
        d = np.zeros(3 * self.num_vertices)
        d[self.pinned_dofs] = self.stiffness
        return d

    def rhs(self) -> np.ndarray:
        b = np.zeros(3 * self.num_vertices)
        b[self.pinned_dofs] = self.stiffness * self.targets
        if self.external_force is not None:
            b = b + self.external_force
        return b

    def with_targets(self, targets: np.ndarray) -> "ConstraintSystem":
        return replace(self, targets=np.asarray(targets, dtype=np.float64).ravel())


# ---------------------------------------------------------------------------
# Condensed system
# ---------------------------------------------------------------------------

@dataclass
class CondensedSystem:
    """Sparse SPD operator and right-hand side for one frame.

    Holds the factorization once computed; hs_constant records whether the
    material Hessian may be reused across frames (quadratic models).
    """

    A: sp.csr_matrix
    b: np.ndarray
    hs_constant: bool = True
    _lu: object | None = None

    def factor(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.A.tocsc())
            except RuntimeError as exc:
                raise SingularSystemError(
                    f"sparse factorization failed ({exc}); "
                    "check pinning and material positive-definiteness"
                ) from exc
            upiv = np.abs(self._lu.U.diagonal())
            if upiv.min() <= 1e-14 * max(upiv.max(), 1.0):
                raise SingularSystemError(
                    f"near-singular system: smallest pivot {upiv.min():.3e} "
                    "(insufficient pinning or indefinite material Hessian)"
                )
        return self._lu


class CondensedAssembler:
    """Precomputes frame-constant pieces of the condensed system.

    Constant per scene: element deformation-gradient maps, volume-scaled
    material blocks (quadratic models), the linearized gradient constant
    b_s = g(s_lin) - H s_lin, pin diagonal, and the COO index pattern of A.
    Per frame only the numeric values change with [R].
    """

    def __init__(
        self,
        mesh: TetMesh,
        defgrad: DefGradOperator,
        H_blocks: np.ndarray,
        g_blocks: np.ndarray,
        constraints: ConstraintSystem,
        s_lin: np.ndarray | None = None,
        hs_constant: bool = True,
    ):
        m = mesh.num_tets
        n = mesh.num_vertices
        if constraints.num_vertices != n:
            raise SolverError("constraint system sized for a different mesh")
        if len(constraints.pin_indices) == 0 and constraints.external_force is None:
            raise SingularSystemError(
                "no pins and no external force: the condensed system is singular"
            )
        self.mesh = mesh
        self.defgrad = defgrad
        self.H_blocks = np.asarray(H_blocks, dtype=np.float64)
        if self.H_blocks.shape != (m, 6, 6):
            raise SolverError(f"H_blocks must be ({m}, 6, 6)")
        g_blocks = np.asarray(g_blocks, dtype=np.float64).reshape(m, 6)
        if s_lin is None:
            s_lin = np.tile(SYM_IDENTITY, (m, 1))
        # constant part of the energy gradient: grad(s) = H s + b_s
        self.b_s = g_blocks - np.einsum("kij,kj->ki", self.H_blocks, s_lin)
        self.constraints = constraints
        self.hs_constant = hs_constant

        # dof gather per element and the fixed COO pattern of A
        tets = mesh.tets
        self.elem_dofs = (3 * tets[:, :, None] + np.arange(3)).reshape(m, 12)
        er = np.repeat(self.elem_dofs[:, :, None], 12, axis=2).ravel()
        ec = np.repeat(self.elem_dofs[:, None, :], 12, axis=1).ravel()
        diag = np.arange(3 * n)
        self.A_rows = np.concatenate([er, diag])
        self.A_cols = np.concatenate([ec, diag])
        self.hx_diag = constraints.hessian_diagonal()
        self.shape = (3 * n, 3 * n)

    def element_projection(self, rblocks: RotationBlocks) -> np.ndarray:
        """G_k = [R_k]^+ B_k per element, shape (m, 6, 12)."""
        return np.einsum("kab,kbc->kac", rblocks.pinv, self.defgrad.element_maps)

    def assemble(
        self, rblocks: RotationBlocks, constraints: ConstraintSystem | None = None
    ) -> CondensedSystem:
        """Build A = H_x + G^T H_s G and b = b_x - G^T b_s for one pose."""
        cons = self.constraints if constraints is None else constraints
        G = self.element_projection(rblocks)
        HG = np.einsum("kab,kbc->kac", self.H_blocks, G)
        A_el = np.einsum("kab,kac->kbc", G, HG)  # (m, 12, 12)
        data = np.concatenate([A_el.ravel(), self.hx_diag])
        A = sp.coo_matrix((data, (self.A_rows, self.A_cols)), shape=self.shape).tocsr()

        b = cons.rhs()
        contrib = np.einsum("kab,ka->kb", G, self.b_s)  # (m, 12)
        np.subtract.at(b, self.elem_dofs.ravel(), contrib.ravel())
        return CondensedSystem(A=A, b=b, hs_constant=self.hs_constant)


def assemble_condensed(
    mesh: TetMesh,
    rotation_blocks: RotationBlocks,
    hs_gs: tuple[np.ndarray, np.ndarray],
    constraints: ConstraintSystem,
    defgrad: DefGradOperator | None = None,
    s_lin: np.ndarray | None = None,
) -> CondensedSystem:
    """One-shot condensed assembly; hs_gs is (H_blocks (m,6,6), g_blocks (m,6))."""
    if defgrad is None:
        defgrad = build_defgrad_operator(mesh)
    H_blocks, g_blocks = hs_gs
    assembler = CondensedAssembler(
        mesh, defgrad, H_blocks, g_blocks, constraints, s_lin=s_lin
    )
    return assembler.assemble(rotation_blocks)


def solve_frame(system: CondensedSystem) -> np.ndarray:
    """Factor (or reuse) and solve; verifies the residual and finiteness."""
    lu = system.factor()
    x = lu.solve(system.b)
    if not np.isfinite(x).all():
        raise SolverError("solve produced non-finite values")
    bnorm = np.linalg.norm(system.b)
    resid = np.linalg.norm(system.A @ x - system.b)
    if bnorm > 0 and resid > 1e-8 * bnorm:
        raise SingularSystemError(
            f"solve residual {resid / bnorm:.3e} exceeds 1e-8; system likely singular"
        )
    return x


# ---------------------------------------------------------------------------
# Strain / multiplier recovery and stationarity diagnostics
# ---------------------------------------------------------------------------

def recover_multipliers_and_strain(
    x: np.ndarray,
    rotation_blocks: RotationBlocks,
    hs_gs: tuple[np.ndarray, np.ndarray],
    defgrad: DefGradOperator,
    s_lin: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Eliminated variables at a solved x: (s (6m,), lambda (9m,), residual).

    s_k is the de-rotated symmetric stretch [R_k]^+ B_k x; the multiplier is
    the minimum-norm vector consistent with s- and x-stationarity.  The
    returned residual is ||Bx - [R]s||_inf, the part of the constraint the
    condensation does not enforce.
    """
    m = rotation_blocks.num_elements
    H_blocks, g_blocks = hs_gs
    if s_lin is None:
        s_lin = np.tile(SYM_IDENTITY, (m, 1))
    b_s = np.asarray(g_blocks).reshape(m, 6) - np.einsum("kij,kj->ki", H_blocks, s_lin)

    F = defgrad.deformation_gradients(x)  # (m, 9)
    s = np.einsum("kab,kb->ka", rotation_blocks.pinv, F)  # (m, 6)
    mu_vec = np.einsum("kij,kj->ki", H_blocks, s) + b_s  # s-gradient constant part
    lam9 = np.einsum("kba,kb->ka", rotation_blocks.pinv, mu_vec)  # [R]^+T mu, (m, 9)
    rs = np.einsum("kab,kb->ka", rotation_blocks.blocks, s)
    residual = float(np.abs(F - rs).max()) if m else 0.0
    return s.ravel(), lam9.ravel(), residual


def lagrangian_residuals(
    x: np.ndarray,
    s: np.ndarray,
    lam9: np.ndarray,
    rotation_blocks: RotationBlocks,
    hs_gs: tuple[np.ndarray, np.ndarray],
    constraints: ConstraintSystem,
    defgrad: DefGradOperator,
    s_lin: np.ndarray | None = None,
) -> dict[str, float]:
    """Infinity norms of the Lagrangian gradient blocks at (s, x, lambda).

    ds and dx must vanish at a correct solve (they fix all sign conventions);
    dlam is the projected-out constraint residual, reported for diagnostics.
    """
    m = rotation_blocks.num_elements
    H_blocks, g_blocks = hs_gs
    if s_lin is None:
        s_lin = np.tile(SYM_IDENTITY, (m, 1))
    b_s = np.asarray(g_blocks).reshape(m, 6) - np.einsum("kij,kj->ki", H_blocks, s_lin)

    s = np.asarray(s).reshape(m, 6)
    lam = np.asarray(lam9).reshape(m, 9)
    ds = np.einsum("kij,kj->ki", H_blocks, s) + b_s - np.einsum(
        "kab,ka->kb", rotation_blocks.blocks, lam
    )
    # x-block: k_s P^T(Px - x_p) - f + B^T lambda
    dx = np.zeros(3 * constraints.num_vertices)
    dofs = constraints.pinned_dofs
    dx[dofs] = constraints.stiffness * (np.asarray(x).ravel()[dofs] - constraints.targets)
    if constraints.external_force is not None:
        dx -= constraints.external_force
    dx += defgrad.matrix.T @ lam.ravel()

    F = defgrad.deformation_gradients(x)
    dlam = F - np.einsum("kab,kb->ka", rotation_blocks.blocks, s)
    return {
        "ds": float(np.abs(ds).max()) if m else 0.0,
        "dx": float(np.abs(dx).max()),
        "dlam": float(np.abs(dlam).max()) if m else 0.0,
    }


# ---------------------------------------------------------------------------
# Full saddle-point oracle
# ---------------------------------------------------------------------------

@dataclass
class KKTSystem:
    """Symmetric indefinite system over (s, x, lambda) for validation.

    Block layout mirrors the condensed derivation before elimination: the
    constraint rows bind s to the de-rotated symmetric part of Bx, using an
    independently computed (numpy pinv) projection.  Intended for tests and
    --validate runs only.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    num_tets: int
    num_vertices: int
    pinv_blocks: np.ndarray  # (m, 6, 9), kept to recover 9m multipliers

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def build_full_kkt(
    mesh: TetMesh,
    rotations: np.ndarray,
    hs_gs: tuple[np.ndarray, np.ndarray],
    constraints: ConstraintSystem,
    s_lin: np.ndarray | None = None,
) -> KKTSystem:
    """Assemble the saddle system by plain per-element loops.

    Everything here is computed independently of the condensed path: rotation
    blocks by explicit basis products, pseudoinverses via numpy's SVD-based
    pinv, deformation-gradient rows from a fresh edge-matrix inverse.
    """
    m = mesh.num_tets
    n = mesh.num_vertices
    E = sym_basis()
    check_orthonormal(rotations)
    H_blocks, g_blocks = hs_gs
    if s_lin is None:
        s_lin = np.tile(SYM_IDENTITY, (m, 1))

    dim = 6 * m + 3 * n + 6 * m
    K = sp.lil_matrix((dim, dim))
    rhs = np.zeros(dim)
    xoff = 6 * m
    loff = 6 * m + 3 * n

    pinvs = np.empty((m, 6, 9))
    for k in range(m):
        Rb = np.stack([(rotations[k] @ E[a]).ravel() for a in range(6)], axis=1)
        pinvs[k] = np.linalg.pinv(Rb)

        tet = mesh.tets[k]
        verts = mesh.vertices[tet]
        Dm = np.stack([verts[1] - verts[0], verts[2] - verts[0], verts[3] - verts[0]], axis=1)
        Dmi = np.linalg.inv(Dm)
        Bk = np.zeros((9, 12))
        for p in range(3):
            for q in range(3):
                r = 3 * p + q
                Bk[r, p] = -Dmi[:, q].sum()
                for v in range(1, 4):
                    Bk[r, 3 * v + p] = Dmi[v - 1, q]
        Gk = pinvs[k] @ Bk  # (6, 12)

        srows = slice(6 * k, 6 * k + 6)
        lrows = slice(loff + 6 * k, loff + 6 * k + 6)
        dofs = (3 * tet[:, None] + np.arange(3)).ravel()

        K[srows, srows] = H_blocks[k]
        K[srows, lrows] = -np.eye(6)
        K[lrows, srows] = -np.eye(6)
        for a, dof in enumerate(dofs):
            K[xoff + dof, lrows] = Gk[:, a]
            K[lrows, xoff + dof] = Gk[:, a]
        rhs[srows] = -(g_blocks[k] - H_blocks[k] @ s_lin[k])

    hx = constraints.hessian_diagonal()
    K[xoff : xoff + 3 * n, xoff : xoff + 3 * n] += sp.diags(hx)
    rhs[xoff : xoff + 3 * n] = constraints.rhs()

    return KKTSystem(
        matrix=K.tocsr(),
        rhs=rhs,
        num_tets=m,
        num_vertices=n,
        pinv_blocks=pinvs,
    )


def solve_full_kkt(
    kkt: KKTSystem, oracle_limit: int = DEFAULT_ORACLE_LIMIT
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Direct solve of the saddle system; returns (s (6m,), x (3n,), lambda (9m,)).

    Dense below DENSE_ORACLE_LIMIT unknowns, sparse LU above; refuses systems
    past oracle_limit.
    """
    dim = kkt.dimension
    if dim > oracle_limit:
        raise SolverError(f"oracle dimension {dim} exceeds limit {oracle_limit}")
    if dim <= DENSE_ORACLE_LIMIT:
        try:
            sol = np.linalg.solve(kkt.matrix.toarray(), kkt.rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"singular saddle system: {exc}") from exc
    else:
        try:
            sol = spla.splu(kkt.matrix.tocsc()).solve(kkt.rhs)
        except RuntimeError as exc:
            raise SingularSystemError(f"singular saddle system: {exc}") from exc
    if not np.isfinite(sol).all():
        raise SingularSystemError("saddle solve produced non-finite values")

    m, n = kkt.num_tets, kkt.num_vertices
    s = sol[: 6 * m]
    x = sol[6 * m : 6 * m + 3 * n]
    lam6 = sol[6 * m + 3 * n :].reshape(m, 6)
    lam9 = np.einsum("kba,kb->ka", kkt.pinv_blocks, lam6)
    return s, x, lam9.ravel()
