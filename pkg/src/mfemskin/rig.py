"""Skeletons, forward kinematics, rotation clustering, and pin constraints.

The rig drives the solve in two ways: every tet inherits the world rotation of
one bone (its rotation cluster), and a sparse set of vertices near the
skeleton is pinned to targets that follow the bones.  Pin targets are each
vertex's own rest position carried along by its bone's world transform, so
the rest pose reproduces itself exactly instead of snapping vertices onto the
handles.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import TetMesh

logger = logging.getLogger(__name__)

CLUSTER_STRATEGIES = ("bone", "joint", "hierarchy", "user")

# bones within this relative band of the closest distance count as tied for
# the hierarchy strategy; the deepest one wins
HIERARCHY_TIE_BAND = 0.05


class RigError(Exception):
    """Invalid skeleton, pose, or clustering input."""


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int | None
    rest: np.ndarray  # (3,)


@dataclass(frozen=True)
class Bone:
    """Segment from a parent joint (proximal) to a child joint (distal)."""

    index: int
    proximal: int
    distal: int
    rest_start: np.ndarray
    rest_end: np.ndarray

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.rest_start + self.rest_end)

    @property
    def rest_length(self) -> float:
        return float(np.linalg.norm(self.rest_end - self.rest_start))


class Skeleton:
    """Joint hierarchy with rest positions; bones derived per child joint.

    Joints must be topologically sorted (parent index < child index) with
    exactly one root.
    """

    def __init__(self, joints: list[Joint]):
        if not joints:
            raise RigError("skeleton needs at least one joint")
        roots = [i for i, j in enumerate(joints) if j.parent is None]
        if len(roots) != 1:
            raise RigError(f"expected exactly one root joint, found {len(roots)}")
        if roots[0] != 0:
            raise RigError("root joint must come first")
        for i, j in enumerate(joints):
            if j.parent is not None and not (0 <= j.parent < i):
                raise RigError(f"joint {i} ({j.name}): parent index must precede it")
        self.joints = [
            Joint(j.name, j.parent, np.asarray(j.rest, dtype=np.float64))
            for j in joints
        ]
        self.bones: list[Bone] = []
        for i, j in enumerate(self.joints):
            if j.parent is None:
                continue
            b = Bone(
                index=len(self.bones),
                proximal=j.parent,
                distal=i,
                rest_start=self.joints[j.parent].rest,
                rest_end=j.rest,
            )
            if b.rest_length <= 0.0:
                raise RigError(f"bone {j.name} has zero rest length")
            self.bones.append(b)

        # depth of each joint from the root, for the hierarchy strategy
        self.depths = np.zeros(len(self.joints), dtype=np.int64)
        for i, j in enumerate(self.joints):
            if j.parent is not None:
                self.depths[i] = self.depths[j.parent] + 1

    @property
    def num_joints(self) -> int:
        return len(self.joints)

    @property
    def num_bones(self) -> int:
        return len(self.bones)

    def rest_positions(self) -> np.ndarray:
        return np.stack([j.rest for j in self.joints])

    def bone_for_joint(self, joint: int) -> int:
        """Bone a joint stands for in joint-site clustering.

        A joint owning child bones maps to its lowest-index child bone; a
        leaf maps to the bone it terminates.
        """
        child_bones = [b.index for b in self.bones if b.proximal == joint]
        if child_bones:
            return min(child_bones)
        for b in self.bones:
            if b.distal == joint:
                return b.index
        raise RigError(f"joint {joint} belongs to no bone")


@dataclass
class PoseFrame:
    """Per-joint local rotations (unit quaternions, wxyz) plus root translation."""

    rotations: np.ndarray  # (num_joints, 4)
    root_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.root_translation = np.asarray(self.root_translation, dtype=np.float64)
        if self.rotations.ndim != 2 or self.rotations.shape[1] != 4:
            raise RigError(f"rotations must be (j, 4) wxyz, got {self.rotations.shape}")
        norms = np.linalg.norm(self.rotations, axis=1)
        if (norms < 1e-6).any():
            raise RigError("near-zero quaternion in pose")
        self.rotations = self.rotations / norms[:, None]

    @classmethod
    def identity(cls, skel: Skeleton) -> "PoseFrame":
        q = np.zeros((skel.num_joints, 4))
        q[:, 0] = 1.0
        return cls(rotations=q)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternions (..., 4) wxyz to rotation matrices (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


@dataclass
class FKResult:
    """World transforms from one pose.

    joint_rotations are world rotations relative to the rest frame (identity
    at rest); bone_rotations[b] is the world rotation of bone b's proximal
    joint, which the bone's rotation cluster inherits.
    """

    skeleton: Skeleton
    joint_rotations: np.ndarray  # (j, 3, 3)
    joint_positions: np.ndarray  # (j, 3)
    bone_rotations: np.ndarray  # (b, 3, 3)

    def transform_points_by_bone(self, bone: int, rest_points: np.ndarray) -> np.ndarray:
        """Apply bone's world transform (relative to rest) to rest points (k, 3)."""
        b = self.skeleton.bones[bone]
        pivot_rest = self.skeleton.joints[b.proximal].rest
        pivot_now = self.joint_positions[b.proximal]
        R = self.bone_rotations[bone]
        return (np.asarray(rest_points) - pivot_rest) @ R.T + pivot_now


def forward_kinematics(skel: Skeleton, pose: PoseFrame) -> FKResult:
    """Compose joint transforms root-to-leaf.

    World rotation of joint j is the product of local rotations down the
    chain; world position accumulates rotated rest offsets.  The rest pose
    (identity quaternions, zero translation) maps every joint to its rest
    position with identity rotations.
    """
    if pose.rotations.shape[0] != skel.num_joints:
        raise RigError(
            f"pose has {pose.rotations.shape[0]} rotations, "
            f"skeleton has {skel.num_joints} joints"
        )
    local = quat_to_matrix(pose.rotations)
    nj = skel.num_joints
    world_rot = np.empty((nj, 3, 3))
    world_pos = np.empty((nj, 3))
    for i, joint in enumerate(skel.joints):
        if joint.parent is None:
            world_rot[i] = local[i]
            world_pos[i] = joint.rest + pose.root_translation
        else:
            p = joint.parent
            world_rot[i] = world_rot[p] @ local[i]
            offset = joint.rest - skel.joints[p].rest
            world_pos[i] = world_pos[p] + world_rot[p] @ offset

    bone_rot = np.stack([world_rot[b.proximal] for b in skel.bones]) \
        if skel.bones else np.zeros((0, 3, 3))
    return FKResult(
        skeleton=skel,
        joint_rotations=world_rot,
        joint_positions=world_pos,
        bone_rotations=bone_rot,
    )


# ---------------------------------------------------------------------------
# Rotation clustering
# ---------------------------------------------------------------------------

@dataclass
class RotationClustering:
    """Constant per-tet bone assignment; all tets in a cluster share a rotation."""

    strategy: str
    assignment: np.ndarray  # (m,) bone indices

    def element_rotations(self, bone_rotations: np.ndarray) -> np.ndarray:
        """(m, 3, 3) per-element rotations from per-bone rotations."""
        return bone_rotations[self.assignment]


def point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point (k, 3) to segment ab."""
    ab = b - a
    denom = float(ab @ ab)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(points))
    closest = a + t[:, None] * ab
    return np.linalg.norm(points - closest, axis=1)


def cluster_rotations(
    mesh: TetMesh,
    skel: Skeleton,
    strategy: str = "bone",
    user_table: np.ndarray | None = None,
) -> RotationClustering:
    """Assign every tet to one bone.

    bone: nearest bone segment to the tet barycenter.
    joint: nearest joint, mapped to a bone via Skeleton.bone_for_joint.
    hierarchy: among bones within HIERARCHY_TIE_BAND of the closest distance,
        the deepest in the hierarchy wins.
    user: pass the table through (one bone index per tet).

    Exact distance ties break to the lowest bone index; assignments are
    deterministic and constant across frames.
    """
    if strategy not in CLUSTER_STRATEGIES:
        raise RigError(f"unknown clustering strategy {strategy!r}")
    if skel.num_bones == 0:
        raise RigError("skeleton has no bones to cluster against")

    m = mesh.num_tets
    if strategy == "user":
        if user_table is None:
            raise RigError("user strategy requires an assignment table")
        table = np.asarray(user_table, dtype=np.int64)
        if table.shape != (m,):
            raise RigError(f"user table must list one bone per tet ({m}), got {table.shape}")
        if table.min() < 0 or table.max() >= skel.num_bones:
            raise RigError("user table references a bone out of range")
        return RotationClustering(strategy=strategy, assignment=table.copy())

    centers = mesh.barycenters()
    if strategy == "joint":
        rest = skel.rest_positions()
        d = np.linalg.norm(centers[:, None, :] - rest[None, :, :], axis=2)
        nearest_joint = np.argmin(d, axis=1)  # argmin takes the lowest index on ties
        joint_bone = np.array([skel.bone_for_joint(j) for j in range(skel.num_joints)])
        assignment = joint_bone[nearest_joint]
        return RotationClustering(strategy=strategy, assignment=assignment)

    dists = np.stack(
        [point_segment_distance(centers, b.rest_start, b.rest_end) for b in skel.bones],
        axis=1,
    )  # (m, nbones)
    if strategy == "bone":
        assignment = np.argmin(dists, axis=1)
    else:  # hierarchy
        dmin = dists.min(axis=1)
        within = dists <= (1.0 + HIERARCHY_TIE_BAND) * dmin[:, None] + 1e-300
        bone_depth = np.array([skel.depths[b.distal] for b in skel.bones])
        # rank candidates by depth, break exact ranks to lowest bone index
        score = np.where(within, bone_depth[None, :], -1)
        assignment = np.argmax(score, axis=1)
    return RotationClustering(strategy=strategy, assignment=assignment)


# ---------------------------------------------------------------------------
# Pin constraints
# ---------------------------------------------------------------------------

DEFAULT_PIN_STIFFNESS = 1000.0


@dataclass
class PinSet:
    """Vertices tied to bone-following targets by a quadratic penalty."""

    indices: np.ndarray  # (p,) unique vertex indices
    bones: np.ndarray  # (p,) bone index per pin
    rest_positions: np.ndarray  # (p, 3)
    stiffness: float = DEFAULT_PIN_STIFFNESS

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.bones = np.asarray(self.bones, dtype=np.int64)
        self.rest_positions = np.asarray(self.rest_positions, dtype=np.float64)
        if len(np.unique(self.indices)) != len(self.indices):
            raise RigError("duplicate pinned vertex")
        if self.stiffness <= 0:
            raise RigError("pin stiffness must be positive")

    @property
    def count(self) -> int:
        return len(self.indices)


def default_pin_radius(mesh: TetMesh) -> float:
    """1.5x the mean boundary edge length."""
    lengths = mesh.surface_edge_lengths()
    if len(lengths) == 0:
        raise RigError("mesh has no boundary edges to derive a pin radius from")
    return 1.5 * float(lengths.mean())


def select_pins(
    mesh: TetMesh,
    skel: Skeleton,
    radius: float | None = None,
    stiffness: float = DEFAULT_PIN_STIFFNESS,
) -> PinSet:
    """Pin vertices within `radius` of any joint or bone midpoint.

    Each pin is assigned the bone owning the closest such site.  Zero pins is
    an error (the system would admit rigid motions); a bone capturing no pins
    only logs a warning.
    """
    if radius is None:
        radius = default_pin_radius(mesh)
    if radius <= 0:
        raise RigError("pin radius must be positive")

    sites = []
    site_bones = []
    for j in range(skel.num_joints):
        sites.append(skel.joints[j].rest)
        site_bones.append(skel.bone_for_joint(j))
    for b in skel.bones:
        sites.append(b.midpoint)
        site_bones.append(b.index)
    sites = np.stack(sites)
    site_bones = np.asarray(site_bones)

    d = np.linalg.norm(mesh.vertices[:, None, :] - sites[None, :, :], axis=2)
    nearest = np.argmin(d, axis=1)
    dmin = d[np.arange(len(d)), nearest]
    mask = dmin <= radius
    indices = np.nonzero(mask)[0]
    if len(indices) == 0:
        raise RigError(
            f"pin radius {radius:g} captures no vertices; "
            "the solve would be singular without pins"
        )
    bones = site_bones[nearest[mask]]
    missing = set(range(skel.num_bones)) - set(bones.tolist())
    if missing:
        logger.warning("bones %s captured no pins at radius %g", sorted(missing), radius)
    return PinSet(
        indices=indices,
        bones=bones,
        rest_positions=mesh.vertices[indices],
        stiffness=stiffness,
    )


def pin_targets(pins: PinSet, fk: FKResult) -> np.ndarray:
    """Target positions (3p,) for the pinned vertices under one pose.

    Each pin's own rest position rides along with its bone's world transform,
    so the identity pose returns the rest positions exactly.
    """
    out = np.empty((pins.count, 3))
    for b in np.unique(pins.bones):
        sel = pins.bones == b
        out[sel] = fk.transform_points_by_bone(int(b), pins.rest_positions[sel])
    return out.ravel()


# ---------------------------------------------------------------------------
# Rig JSON I/O
# ---------------------------------------------------------------------------

def skeleton_to_dict(skel: Skeleton) -> dict:
    return {
        "joints": [
            {
                "name": j.name,
                "parent": j.parent,
                "rest": [float(c) for c in j.rest],
            }
            for j in skel.joints
        ]
    }


def skeleton_from_dict(data: dict) -> Skeleton:
    try:
        joints = [
            Joint(name=j.get("name", f"joint{i}"), parent=j["parent"], rest=np.asarray(j["rest"]))
            for i, j in enumerate(data["joints"])
        ]
    except (KeyError, TypeError) as exc:
        raise RigError(f"malformed skeleton JSON: {exc}")
    return Skeleton(joints)


def frames_from_dict(data: dict, skel: Skeleton) -> list[PoseFrame]:
    frames = []
    for f in data.get("frames", []):
        frames.append(
            PoseFrame(
                rotations=np.asarray(f["rotations"]),
                root_translation=np.asarray(f.get("root_translation", [0.0, 0.0, 0.0])),
            )
        )
    for i, f in enumerate(frames):
        if f.rotations.shape[0] != skel.num_joints:
            raise RigError(f"frame {i}: rotation count != joint count")
    return frames


def load_rig(path) -> tuple[Skeleton, list[PoseFrame]]:
    """Read skeleton + animation JSON: joints plus a list of pose frames."""
    with open(path) as fh:
        data = json.load(fh)
    skel = skeleton_from_dict(data)
    return skel, frames_from_dict(data, skel)


def save_rig(path, skel: Skeleton, frames: list[PoseFrame]) -> None:
    data = skeleton_to_dict(skel)
    data["frames"] = [
        {
            "root_translation": [float(c) for c in f.root_translation],
            "rotations": [[float(c) for c in q] for q in f.rotations],
        }
        for f in frames
    ]
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)


def load_user_clustering(path, num_tets: int) -> np.ndarray:
    """Read a JSON array of per-tet bone indices."""
    with open(path) as fh:
        table = json.load(fh)
    arr = np.asarray(table, dtype=np.int64)
    if arr.shape != (num_tets,):
        raise RigError(f"clustering table has {arr.shape} entries, mesh has {num_tets} tets")
    return arr
