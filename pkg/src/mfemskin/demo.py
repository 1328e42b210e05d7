"""Procedural demo scene: a box beam with a 3-joint skeleton.

Keeps tests and the demo CLI free of external assets.  The beam lies along
+x, the skeleton runs root -> middle -> tip through the cross-section
centroid, and the canned animation bends the middle joint about z.
"""

from __future__ import annotations

import itertools

import numpy as np

from .geometry import TetMesh
from .materials import MaterialParams
from .rig import Joint, PoseFrame, Skeleton

# vertex orders of the six tets tiling a unit cell (Kuhn subdivision):
# walk from corner 0 to corner 7 adding one axis at a time, once per
# permutation of the axes; neighbouring cells tile conformingly.
_CUBE_TETS = [
    tuple(
        np.cumsum([0] + [1 << axis for axis in perm])
    )
    for perm in itertools.permutations(range(3))
]


def beam_mesh(
    length: float = 4.0,
    width: float = 1.0,
    height: float = 1.0,
    nx: int = 8,
    ny: int = 2,
    nz: int = 2,
) -> TetMesh:
    """Axis-aligned box beam, (nx, ny, nz) cells of six tets each."""
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(-width / 2, width / 2, ny + 1)
    zs = np.linspace(-height / 2, height / 2, nz + 1)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    vertices = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    # corner c of a cell maps bits (x, y, z) of c to index offsets
    tets = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                corners = [
                    vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))
                    for c in range(8)
                ]
                for tet in _CUBE_TETS:
                    tets.append([corners[c] for c in tet])
    return TetMesh(vertices=vertices, tets=np.asarray(tets))


def beam_skeleton(length: float = 4.0) -> Skeleton:
    """Three joints along the beam axis: root, middle, tip (two bones)."""
    return Skeleton(
        [
            Joint(name="root", parent=None, rest=np.array([0.0, 0.0, 0.0])),
            Joint(name="middle", parent=0, rest=np.array([length / 2, 0.0, 0.0])),
            Joint(name="tip", parent=1, rest=np.array([length, 0.0, 0.0])),
        ]
    )


def rotation_quat(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Unit quaternion (w, x, y, z) for a rotation about axis."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle_rad
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def bend_pose(skel: Skeleton, angle_rad: float, joint: int = 1, axis=(0, 0, 1)) -> PoseFrame:
    """Identity pose with one joint rotated by angle about axis."""
    pose = PoseFrame.identity(skel)
    q = pose.rotations.copy()
    q[joint] = rotation_quat(np.asarray(axis, dtype=float), angle_rad)
    return PoseFrame(rotations=q, root_translation=pose.root_translation)


def bend_animation(
    skel: Skeleton,
    max_angle_deg: float = 95.0,
    frames: int = 10,
    joint: int = 1,
    axis=(0, 0, 1),
) -> list[PoseFrame]:
    """Monotone sweep of one joint from rest to max_angle_deg."""
    angles = np.linspace(0.0, np.deg2rad(max_angle_deg), frames)
    return [bend_pose(skel, a, joint=joint, axis=axis) for a in angles]


def beam_material(mu: float = 1e3, model: str = "arap", lam: float = 0.0) -> MaterialParams:
    return MaterialParams(model=model, mu=mu, lam=lam)


def flour_sack_scale_mesh() -> TetMesh:
    """Beam at benchmark scale: ~2.5k vertices, ~11.7k tets."""
    return beam_mesh(length=4.0, width=1.2, height=1.2, nx=24, ny=9, nz=9)
