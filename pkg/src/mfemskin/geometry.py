"""Tetrahedral mesh geometry: loading, volumes, and the deformation-gradient operator.

A linear tet's deformation gradient is F = Ds * Dm^-1 with Dm the rest edge
matrix and Ds the deformed one, so F is linear in vertex positions.  We store
that linear map per element as a 9x12 matrix acting on the tet's stacked
coordinates (row-major vec of F, per symvec), and assemble a global sparse
operator of shape (9m, 3n).  Both depend only on rest positions and stay
constant across frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .symvec import vec9

# tets whose volume falls below this fraction of the mean are rejected
DEGENERACY_RATIO = 1e-12


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


class MeshParseError(MeshError):
    """Malformed mesh file; carries the offending line number."""

    def __init__(self, path, line_no: int, message: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class DegenerateElementError(MeshError):
    """Tets too flat to invert their rest edge matrix."""

    def __init__(self, elements, message: str):
        self.elements = list(elements)
        super().__init__(message)


@dataclass
class TetMesh:
    """Rest-pose tetrahedral mesh.

    Attributes:
        vertices: (n, 3) rest positions.
        tets: (m, 4) vertex indices, oriented to positive signed volume.
        volumes: (m,) positive rest volumes, |det Dm|/6.
        surface_faces: (f, 3) boundary triangles (faces used by exactly one
            tet), wound so normals point out of the mesh.
    """

    vertices: np.ndarray
    tets: np.ndarray
    volumes: np.ndarray = field(init=False)
    surface_faces: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.tets = np.ascontiguousarray(self.tets, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {self.vertices.shape}")
        if self.tets.ndim != 2 or self.tets.shape[1] != 4:
            raise MeshError(f"tets must be (m, 4), got {self.tets.shape}")
        n = len(self.vertices)
        if self.tets.size and (self.tets.min() < 0 or self.tets.max() >= n):
            raise MeshError("tet index out of range")

        signed = signed_volumes(self.vertices, self.tets)
        flipped = signed < 0
        # orientation fix: swapping the last two vertices negates the volume
        self.tets[flipped] = self.tets[flipped][:, [0, 1, 3, 2]]
        self.volumes = np.abs(signed)

        mean_vol = self.volumes.mean() if len(self.volumes) else 0.0
        bad = np.nonzero(self.volumes <= DEGENERACY_RATIO * mean_vol)[0]
        if len(bad):
            raise DegenerateElementError(
                bad, f"{len(bad)} degenerate tets (volume < {DEGENERACY_RATIO:g} "
                f"of mean), e.g. element {bad[0]}"
            )
        self.surface_faces = boundary_faces(self.tets)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_tets(self) -> int:
        return len(self.tets)

    def barycenters(self) -> np.ndarray:
        """(m, 3) tet barycenters at rest."""
        return self.vertices[self.tets].mean(axis=1)

    def surface_edge_lengths(self) -> np.ndarray:
        """Lengths of the unique boundary-triangle edges."""
        f = self.surface_faces
        edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        edges = np.unique(np.sort(edges, axis=1), axis=0)
        d = self.vertices[edges[:, 0]] - self.vertices[edges[:, 1]]
        return np.linalg.norm(d, axis=1)


def signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Signed volume det(Dm)/6 per tet."""
    v = vertices[tets]
    dm = v[:, 1:] - v[:, :1]  # (m, 3, 3) rows = edge vectors
    # det of edge matrix with edges as columns == det with edges as rows
    return np.linalg.det(dm) / 6.0


def boundary_faces(tets: np.ndarray) -> np.ndarray:
    """Triangles referenced by exactly one tet, outward-wound.

    For a positively oriented tet (a, b, c, d) the four outward faces are
    (b, c, d), (a, d, c), (a, b, d), (a, c, b).
    """
    if len(tets) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    a, b, c, d = tets[:, 0], tets[:, 1], tets[:, 2], tets[:, 3]
    faces = np.concatenate([
        np.stack([b, c, d], axis=1),
        np.stack([a, d, c], axis=1),
        np.stack([a, b, d], axis=1),
        np.stack([a, c, b], axis=1),
    ])
    keys = np.sort(faces, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return faces[counts[inverse] == 1]


@dataclass
class DefGradOperator:
    """Discrete deformation-gradient operator.

    Attributes:
        element_maps: (m, 9, 12) per-element maps from the tet's stacked
            vertex coordinates to vec9(F).
        matrix: (9m, 3n) sparse CSR assembly of the element maps.
    """

    element_maps: np.ndarray
    matrix: sp.csr_matrix

    def deformation_gradients(self, positions: np.ndarray) -> np.ndarray:
        """vec9(F) for every element at the given stacked positions (3n,)."""
        return (self.matrix @ np.asarray(positions).ravel()).reshape(-1, 9)


def build_defgrad_operator(mesh: TetMesh) -> DefGradOperator:
    """Build per-element and global deformation-gradient operators.

    Raises DegenerateElementError if any rest edge matrix is singular
    (guarded already by TetMesh volume checks, re-checked here).
    """
    verts = mesh.vertices[mesh.tets]  # (m, 4, 3)
    dm = (verts[:, 1:] - verts[:, :1]).transpose(0, 2, 1)  # (m, 3, 3) edges as columns
    try:
        dm_inv = np.linalg.inv(dm)
    except np.linalg.LinAlgError:
        dets = np.linalg.det(dm)
        bad = np.nonzero(np.abs(dets) < 1e-300)[0]
        raise DegenerateElementError(bad, f"singular rest edge matrix in tets {bad[:8]}")

    m = mesh.num_tets
    # F_pq = sum_v x[v,p] * dm_inv[v-1,q]  (v=1..3), vertex 0 carries -colsum
    maps = np.zeros((m, 9, 12))
    colsum = dm_inv.sum(axis=1)  # (m, 3)
    for p in range(3):
        for q in range(3):
            r = 3 * p + q
            maps[:, r, 3 * 0 + p] = -colsum[:, q]
            for v in range(1, 4):
                maps[:, r, 3 * v + p] = dm_inv[:, v - 1, q]

    rows, cols = element_assembly_indices(mesh.tets, block_rows=9)
    matrix = sp.csr_matrix(
        (maps.ravel(), (rows, cols)), shape=(9 * m, 3 * mesh.num_vertices)
    )
    return DefGradOperator(element_maps=maps, matrix=matrix)


def element_assembly_indices(tets: np.ndarray, block_rows: int):
    """COO (rows, cols) for stacking per-element (block_rows x 12) blocks.

    Element k occupies rows [block_rows*k, block_rows*(k+1)); its 12 columns
    are the x/y/z dofs of its four vertices.
    """
    m = len(tets)
    local_cols = (3 * tets[:, :, None] + np.arange(3)).reshape(m, 12)  # (m, 12)
    rows = np.repeat(
        np.arange(block_rows * m).reshape(m, block_rows), 12, axis=1
    ).ravel()
    cols = np.tile(local_cols[:, None, :], (1, block_rows, 1)).ravel()
    return rows, cols


def mesh_volume(mesh: TetMesh, positions: np.ndarray) -> float:
    """Sum of signed tet volumes at the given stacked positions (3n,)."""
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if len(pts) != mesh.num_vertices:
        raise MeshError(f"expected {3 * mesh.num_vertices} position entries")
    return float(signed_volumes(pts, mesh.tets).sum())


# ---------------------------------------------------------------------------
# MEDIT .mesh ASCII I/O and OBJ surface export
# ---------------------------------------------------------------------------

def load_tet_mesh(path) -> TetMesh:
    """Read a MEDIT .mesh ASCII file (Vertices + Tetrahedra sections).

    Sections other than Vertices/Tetrahedra are skipped.  Indices in the file
    are 1-based.  Raises MeshParseError with a line number on malformed input
    and DegenerateElementError for near-zero-volume tets.
    """
    with open(path, "r") as fh:
        lines = fh.readlines()

    vertices: list[list[float]] = []
    tets: list[list[int]] = []
    i = 0
    nlines = len(lines)

    def tokens(line_no):
        return lines[line_no].split()

    while i < nlines:
        toks = tokens(i)
        if not toks or toks[0].startswith("#"):
            i += 1
            continue
        key = toks[0].lower()
        if key == "meshversionformatted" or key == "dimension":
            # value may sit on the same or the following line
            i += 1 if len(toks) > 1 else 2
            continue
        if key == "end":
            break
        if key == "vertices":
            i, vertices = _read_block(lines, i, path, ncols=3, cast=float)
            continue
        if key == "tetrahedra":
            i, tets = _read_block(lines, i, path, ncols=4, cast=int)
            continue
        # unknown section: skip its count and records if it looks like one
        if len(toks) == 1 and key.isalpha():
            i = _skip_block(lines, i)
            continue
        i += 1

    if not vertices:
        raise MeshParseError(path, nlines, "no Vertices section found")
    if not tets:
        raise MeshParseError(path, nlines, "no Tetrahedra section found")

    tet_arr = np.asarray(tets, dtype=np.int64) - 1  # MEDIT is 1-based
    return TetMesh(vertices=np.asarray(vertices), tets=tet_arr)


def _read_block(lines, i, path, ncols, cast):
    """Parse 'Keyword / count / count records' starting at line i."""
    toks = lines[i].split()
    if len(toks) > 1:
        count_tok, i = toks[1], i + 1
    else:
        i += 1
        while i < len(lines) and not lines[i].split():
            i += 1
        if i >= len(lines):
            raise MeshParseError(path, i, "missing record count")
        count_tok, i = lines[i].split()[0], i + 1
    try:
        count = int(count_tok)
    except ValueError:
        raise MeshParseError(path, i, f"bad record count {count_tok!r}")

    out = []
    while len(out) < count:
        if i >= len(lines):
            raise MeshParseError(path, i, f"expected {count} records, got {len(out)}")
        toks = lines[i].split()
        if not toks:
            i += 1
            continue
        if len(toks) < ncols:
            raise MeshParseError(path, i + 1, f"expected {ncols}+ fields, got {len(toks)}")
        try:
            out.append([cast(t) for t in toks[:ncols]])
        except ValueError as exc:
            raise MeshParseError(path, i + 1, str(exc))
        i += 1
    return i, out


def _skip_block(lines, i):
    i += 1
    while i < len(lines) and not lines[i].split():
        i += 1
    if i < len(lines):
        toks = lines[i].split()
        try:
            count = int(toks[0])
        except (ValueError, IndexError):
            return i
        i += 1
        seen = 0
        while i < len(lines) and seen < count:
            if lines[i].split():
                seen += 1
            i += 1
    return i


def save_tet_mesh(path, mesh: TetMesh) -> None:
    """Write a TetMesh as MEDIT .mesh ASCII (1-based indices)."""
    with open(path, "w") as fh:
        fh.write("MeshVersionFormatted 2\nDimension 3\n")
        fh.write(f"Vertices\n{mesh.num_vertices}\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g} 0\n")
        fh.write(f"Tetrahedra\n{mesh.num_tets}\n")
        for t in mesh.tets:
            fh.write(f"{t[0] + 1} {t[1] + 1} {t[2] + 1} {t[3] + 1} 0\n")
        fh.write("End\n")


def write_surface_obj(path, mesh: TetMesh, positions: np.ndarray | None = None) -> None:
    """Export the boundary triangles as OBJ, substituting per-frame positions.

    All vertices are emitted (faces index the full vertex list), so vertex
    indices match across the mesh and its exports.
    """
    pts = mesh.vertices if positions is None else np.asarray(positions).reshape(-1, 3)
    if len(pts) != mesh.num_vertices:
        raise MeshError("positions length does not match vertex count")
    with open(path, "w") as fh:
        for p in pts:
            fh.write(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        for f in mesh.surface_faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def rest_identity_check(mesh: TetMesh, op: DefGradOperator) -> float:
    """Max deviation of B applied to rest positions from vec9(identity)."""
    F = op.deformation_gradients(mesh.vertices.ravel())
    return float(np.abs(F - vec9(np.eye(3))).max())
