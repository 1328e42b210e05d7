"""FastAPI app: scene bootstrap over HTTP, pose solves over a websocket.

The websocket side runs a reader task and a solver loop joined by a
one-slot mailbox, so a burst of pose updates collapses to the newest one;
the client tells dropped frames apart by the echoed sequence number.
Binary reply layout: seq (u64 LE), count (u32 LE), count*3 f32 LE positions.
"""

from __future__ import annotations

import asyncio
import json
import logging
import struct
import threading

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import ValidationError

from ..pipeline import Scene
from ..rig import PoseFrame, RigError
from ..solver import SolverError
from .models import (
    ClusterSummary,
    ErrorMessage,
    JointDescription,
    MaterialSummary,
    PinSummary,
    PoseMessage,
    SceneDescription,
)

logger = logging.getLogger(__name__)

FRAME_HEADER = struct.Struct("<QI")


def pack_frame(seq: int, positions: np.ndarray) -> bytes:
    """Binary position frame: u64 seq, u32 count, then count*3 float32, all LE."""
    pts = np.ascontiguousarray(positions, dtype="<f4").reshape(-1, 3)
    return FRAME_HEADER.pack(seq, len(pts)) + pts.tobytes()


def unpack_frame(payload: bytes) -> tuple[int, np.ndarray]:
    """Inverse of pack_frame; used by tests and local clients."""
    seq, count = FRAME_HEADER.unpack_from(payload)
    pts = np.frombuffer(payload, dtype="<f4", offset=FRAME_HEADER.size)
    if pts.size != 3 * count:
        raise ValueError(f"frame advertises {count} points, carries {pts.size // 3}")
    return seq, pts.reshape(count, 3).astype(np.float64)


class SceneSession:
    """One loaded scene plus a lock serializing its solves.

    The scene's assembler caches everything pose-independent, so a solve is
    FK, numeric assembly, factor, back-substitution. solve_count increases
    monotonically over completed solves.
    """

    def __init__(self, scene: Scene):
        self.scene = scene
        self.solve_count = 0
        self._lock = threading.Lock()

    def solve_positions(self, pose: PoseFrame) -> np.ndarray:
        with self._lock:
            solution = self.scene.solve_pose(pose, frame_index=self.solve_count)
            self.solve_count += 1
            return solution.positions

    def describe(self) -> SceneDescription:
        scene = self.scene
        skel = scene.skeleton
        counts = np.bincount(
            scene.clustering.assignment, minlength=skel.num_bones
        )
        return SceneDescription(
            name=scene.name,
            num_vertices=scene.mesh.num_vertices,
            num_tets=scene.mesh.num_tets,
            num_joints=skel.num_joints,
            num_bones=skel.num_bones,
            vertices=[tuple(v) for v in scene.mesh.vertices.tolist()],
            faces=[tuple(f) for f in scene.mesh.surface_faces.tolist()],
            joints=[
                JointDescription(name=j.name, parent=j.parent, rest=tuple(j.rest.tolist()))
                for j in skel.joints
            ],
            bones=[(b.proximal, b.distal) for b in skel.bones],
            clustering=ClusterSummary(
                strategy=scene.clustering.strategy, cluster_sizes=counts.tolist()
            ),
            pins=PinSummary(count=scene.pins.count, stiffness=scene.pins.stiffness),
            material=MaterialSummary(
                model=scene.material.model, mu=scene.material.mu, lam=scene.material.lam
            ),
        )


class _Mailbox:
    """Single-slot pose mailbox: put overwrites, take waits for the newest."""

    def __init__(self):
        self._event = asyncio.Event()
        self._item = None
        self.closed = False

    def put(self, item):
        self._item = item
        self._event.set()

    def close(self):
        self.closed = True
        self._event.set()

    @property
    def pending(self) -> bool:
        return self._item is not None

    async def take(self):
        await self._event.wait()
        item, self._item = self._item, None
        if not self.closed:
            self._event.clear()
        return item


def _parse_pose(text: str, num_joints: int) -> tuple[int | None, PoseFrame | None, str | None]:
    """Returns (seq, pose, error). Bad input yields an error string, never raises."""
    seq = None
    try:
        raw = json.loads(text)
        if isinstance(raw, dict) and isinstance(raw.get("seq"), int):
            seq = raw["seq"]
        msg = PoseMessage.model_validate(raw)
    except (json.JSONDecodeError, ValidationError) as exc:
        return seq, None, f"malformed pose message: {exc}"
    if len(msg.rotations) != num_joints:
        return msg.seq, None, (
            f"pose has {len(msg.rotations)} rotations, skeleton has {num_joints} joints"
        )
    try:
        pose = PoseFrame(
            rotations=np.asarray(msg.rotations, dtype=np.float64),
            root_translation=np.asarray(msg.root_translation, dtype=np.float64),
        )
    except RigError as exc:
        return msg.seq, None, str(exc)
    return msg.seq, pose, None


def create_app(scene: Scene | None, static_dir=None) -> FastAPI:
    """Build the service app around one scene (or none, for error-path tests)."""
    app = FastAPI(title="mfemskin pose service")
    session = SceneSession(scene) if scene is not None else None
    app.state.session = session

    @app.get("/scene", response_model=SceneDescription)
    def get_scene():
        if session is None:
            raise HTTPException(status_code=404, detail="no scene loaded")
        return session.describe()

    @app.get("/health")
    def health():
        return {"status": "ok", "scene_loaded": session is not None}

    @app.websocket("/pose")
    async def pose_socket(ws: WebSocket):
        await ws.accept()
        if session is None:
            await ws.send_text(ErrorMessage(seq=None, message="no scene loaded").model_dump_json())
            await ws.close()
            return
        num_joints = session.scene.skeleton.num_joints
        mailbox = _Mailbox()

        async def reader():
            try:
                while True:
                    mailbox.put(await ws.receive_text())
            except (WebSocketDisconnect, RuntimeError):
                mailbox.close()

        reader_task = asyncio.create_task(reader())
        loop = asyncio.get_running_loop()
        try:
            while True:
                item = await mailbox.take()
                if item is None and mailbox.closed:
                    break
                seq, pose, err = _parse_pose(item, num_joints)
                if err is not None:
                    await ws.send_text(ErrorMessage(seq=seq, message=err).model_dump_json())
                    continue
                try:
                    positions = await loop.run_in_executor(
                        None, session.solve_positions, pose
                    )
                except SolverError as exc:
                    logger.warning("pose %s solve failed: %s", seq, exc)
                    await ws.send_text(
                        ErrorMessage(seq=seq, message=f"solve failed: {exc}").model_dump_json()
                    )
                    continue
                if mailbox.pending:
                    continue  # a newer pose arrived mid-solve; drop this frame
                await ws.send_bytes(pack_frame(seq, positions))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            reader_task.cancel()

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
