"""Wire models for the pose service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class PoseMessage(BaseModel):
    """One pose request on the websocket.

    rotations are unit quaternions in (w, x, y, z) order, one per joint in
    skeleton order; the sequence number is echoed back so the client can
    discard frames made stale by coalescing.
    """

    seq: int = 0
    root_translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotations: list[tuple[float, float, float, float]] = Field(min_length=1)


class ErrorMessage(BaseModel):
    seq: int | None
    message: str


class JointDescription(BaseModel):
    name: str
    parent: int | None
    rest: tuple[float, float, float]


class ClusterSummary(BaseModel):
    strategy: str
    cluster_sizes: list[int]


class PinSummary(BaseModel):
    count: int
    stiffness: float


class MaterialSummary(BaseModel):
    model: str
    mu: float
    lam: float


class SceneDescription(BaseModel):
    """Static scene payload for client bootstrap.

    faces index into the full vertex list (0-based), matching the OBJ
    exports; per-frame position buffers from the websocket cover the same
    full vertex list in the same order.
    """

    name: str
    num_vertices: int
    num_tets: int
    num_joints: int
    num_bones: int
    vertices: list[tuple[float, float, float]]
    faces: list[tuple[int, int, int]]
    joints: list[JointDescription]
    bones: list[tuple[int, int]]
    clustering: ClusterSummary
    pins: PinSummary
    material: MaterialSummary
