"""Independent reference implementations used to check the package.

Everything here is deliberately written the slow, obvious way (per-element
loops, matrix-form energies, quaternion sandwich products, homogeneous
transforms) so a bug in the package's vectorized code cannot hide in a
shared code path.
"""

import numpy as np


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def fd_gradient(f, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hessian(f, x, h=1e-4):
    """Hessian from second-order central differences of the scalar f."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    H = np.zeros((n, n))
    for i in range(n):
        ei = np.zeros_like(x)
        ei.flat[i] = h
        for j in range(n):
            ej = np.zeros_like(x)
            ej.flat[j] = h
            H[i, j] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h * h)
    return H


# ---------------------------------------------------------------------------
# Matrix-form material energies (no 6-vector weights anywhere)
# ---------------------------------------------------------------------------

def sym_from_vec(s):
    """6-vector (Sxx, Syy, Szz, Sxy, Sxz, Syz) to a symmetric 3x3 matrix."""
    sxx, syy, szz, sxy, sxz, syz = np.asarray(s, dtype=np.float64)
    return np.array([[sxx, sxy, sxz], [sxy, syy, syz], [sxz, syz, szz]])


def arap_energy_matrix(s, mu, lam=0.0):
    d = sym_from_vec(s) - np.eye(3)
    return mu * (d * d).sum()


def corotational_energy_matrix(s, mu, lam):
    d = sym_from_vec(s) - np.eye(3)
    return mu * (d * d).sum() + 0.5 * lam * np.trace(d) ** 2


# ---------------------------------------------------------------------------
# Quaternions and forward kinematics via homogeneous transforms
# ---------------------------------------------------------------------------

def quat_rotate(q, v):
    """Rotate v by unit quaternion (w, x, y, z) using the sandwich product."""
    w, x, y, z = q
    qv = np.array([x, y, z])
    v = np.asarray(v, dtype=np.float64)
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_matrix_reference(q):
    """Rotation matrix column by column via sandwich products."""
    return np.stack([quat_rotate(q, e) for e in np.eye(3)], axis=1)


def _translation(t):
    T = np.eye(4)
    T[:3, 3] = t
    return T


def fk_reference(joint_parents, joint_rests, rotations, root_translation):
    """World transforms by composing 4x4 homogeneous matrices root to leaf.

    Joint j contributes a rotation about its own rest position; the root map
    additionally carries the global translation.  Returns the world transform
    list plus (world_rotations, world_positions) of the joints themselves.
    """
    n = len(joint_parents)
    mats = [None] * n
    for j in range(n):
        rest = np.asarray(joint_rests[j], dtype=np.float64)
        rot4 = np.eye(4)
        rot4[:3, :3] = quat_to_matrix_reference(rotations[j])
        pivot = _translation(rest) @ rot4 @ _translation(-rest)
        if joint_parents[j] is None:
            mats[j] = _translation(root_translation) @ pivot
        else:
            mats[j] = mats[joint_parents[j]] @ pivot
    rots = np.array([m[:3, :3] for m in mats])
    pos = np.array(
        [m @ np.append(joint_rests[i], 1.0) for i, m in enumerate(mats)]
    )[:, :3]
    return mats, rots, pos


# ---------------------------------------------------------------------------
# Geometry references
# ---------------------------------------------------------------------------

def tet_volume_reference(a, b, c, d):
    """Volume via the scalar triple product, vertices in any orientation."""
    return abs(np.dot(a - d, np.cross(b - d, c - d))) / 6.0


def defgrad_reference(rest_vertices, tets, positions):
    """Per-element F = Ds Dm^-1, one tet at a time, edges as columns."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    out = np.empty((len(tets), 3, 3))
    for k, tet in enumerate(tets):
        X = rest_vertices[tet]
        x = positions[tet]
        Dm = np.column_stack([X[1] - X[0], X[2] - X[0], X[3] - X[0]])
        Ds = np.column_stack([x[1] - x[0], x[2] - x[0], x[3] - x[0]])
        out[k] = Ds @ np.linalg.inv(Dm)
    return out


def boundary_faces_reference(tets):
    """Faces seen by exactly one tet, as a set of sorted vertex triples."""
    seen = {}
    for tet in tets:
        a, b, c, d = (int(v) for v in tet)
        for face in ((a, b, c), (a, b, d), (a, c, d), (b, c, d)):
            key = tuple(sorted(face))
            seen[key] = seen.get(key, 0) + 1
    return {k for k, n in seen.items() if n == 1}


def rotation_block_reference(R):
    """9x6 block mapping s to vec(R @ mat(s)), built entry by entry."""
    B = np.zeros((9, 6))
    for a in range(6):
        s = np.zeros(6)
        s[a] = 1.0
        B[:, a] = (R @ sym_from_vec(s)).reshape(9)
    return B


def random_rotation(rng):
    """Uniform-ish random rotation from a normalized random quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return quat_to_matrix_reference(q)
