"""End-to-end batch pipeline: load a scene, loop over poses, export frames.

Everything pose-independent is computed once up front (deformation-gradient
operator, clustering, pins, material blocks, assembly pattern); the frame
loop is forward kinematics -> rotation blocks -> assemble -> solve -> export.
Outputs are deterministic: identical inputs produce bit-identical OBJ files.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import demo
from .geometry import (
    DefGradOperator,
    TetMesh,
    build_defgrad_operator,
    load_tet_mesh,
    mesh_volume,
    write_surface_obj,
)
from .materials import MaterialParams, element_blocks, load_material
from .rig import (
    PinSet,
    PoseFrame,
    RotationClustering,
    Skeleton,
    cluster_rotations,
    forward_kinematics,
    load_rig,
    load_user_clustering,
    pin_targets,
    select_pins,
)
from .solver import (
    CondensedAssembler,
    ConstraintSystem,
    SolverError,
    build_full_kkt,
    build_rotation_blocks,
    lagrangian_residuals,
    recover_multipliers_and_strain,
    solve_frame,
    solve_full_kkt,
)

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Invalid run configuration."""


@dataclass
class ExternalForces:
    """Constant or per-frame point loads on named vertices."""

    constant: np.ndarray | None = None  # (3n,)
    per_frame: list[np.ndarray] | None = None

    def for_frame(self, index: int) -> np.ndarray | None:
        if self.per_frame is not None:
            return self.per_frame[min(index, len(self.per_frame) - 1)]
        return self.constant


def _force_vector(entry: dict, num_vertices: int) -> np.ndarray:
    verts = np.asarray(entry["vertices"], dtype=np.int64)
    forces = np.asarray(entry["forces"], dtype=np.float64)
    if forces.shape != (len(verts), 3):
        raise ConfigError("forces must list one 3-vector per vertex")
    if len(verts) and (verts.min() < 0 or verts.max() >= num_vertices):
        raise ConfigError("force vertex index out of range")
    f = np.zeros(3 * num_vertices)
    for v, fv in zip(verts, forces):
        f[3 * v : 3 * v + 3] += fv
    return f


def load_forces(path, num_vertices: int) -> ExternalForces:
    """Read {"constant": {...}} or {"frames": [{...}, ...]} force files."""
    with open(path) as fh:
        data = json.load(fh)
    if "constant" in data:
        return ExternalForces(constant=_force_vector(data["constant"], num_vertices))
    if "frames" in data:
        return ExternalForces(
            per_frame=[_force_vector(e, num_vertices) for e in data["frames"]]
        )
    raise ConfigError("force file needs a 'constant' or 'frames' key")


@dataclass
class RunConfig:
    mesh_path: str = ""
    rig_path: str = ""
    material_path: str | None = None
    clustering: str = "bone"
    user_table_path: str | None = None
    pin_radius: float | None = None
    stiffness: float = 1000.0
    forces_path: str | None = None
    out_dir: str = "out"
    validate: bool = False
    export_obj: bool = True

    def check(self):
        for label, path in (("mesh", self.mesh_path), ("rig", self.rig_path)):
            if not path or not os.path.exists(path):
                raise ConfigError(f"{label} file not found: {path!r}")
        for path in (self.material_path, self.forces_path, self.user_table_path):
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"file not found: {path!r}")
        if self.stiffness <= 0:
            raise ConfigError("stiffness must be positive")
        if self.clustering == "user" and self.user_table_path is None:
            raise ConfigError("user clustering requires a table file")


@dataclass
class FrameReport:
    frame: int
    assemble_time: float
    factor_time: float
    solve_time: float
    volume: float
    volume_change_pct: float
    max_pin_residual: float
    validation: dict | None = None

    @property
    def total_time(self) -> float:
        return self.assemble_time + self.factor_time + self.solve_time


@dataclass
class FrameSolution:
    positions: np.ndarray  # (n, 3)
    report: FrameReport


class Scene:
    """A loaded mesh/rig/material with all pose-independent work done.

    solve_pose is the single solve path shared by the batch pipeline and the
    interactive service, so both produce identical buffers for equal poses.
    """

    def __init__(
        self,
        mesh: TetMesh,
        skeleton: Skeleton,
        material: MaterialParams,
        clustering: RotationClustering | None = None,
        clustering_strategy: str = "bone",
        user_table: np.ndarray | None = None,
        pins: PinSet | None = None,
        pin_radius: float | None = None,
        stiffness: float = 1000.0,
        forces: ExternalForces | None = None,
        name: str = "scene",
    ):
        self.name = name
        self.mesh = mesh
        self.skeleton = skeleton
        self.material = material
        self.defgrad: DefGradOperator = build_defgrad_operator(mesh)
        self.clustering = clustering or cluster_rotations(
            mesh, skeleton, strategy=clustering_strategy, user_table=user_table
        )
        self.pins = pins or select_pins(mesh, skeleton, radius=pin_radius, stiffness=stiffness)
        self.forces = forces or ExternalForces()
        self.hs_gs = element_blocks(mesh, material)
        rest_targets = self.pins.rest_positions.ravel()
        self.constraints = ConstraintSystem(
            num_vertices=mesh.num_vertices,
            pin_indices=self.pins.indices,
            stiffness=self.pins.stiffness,
            targets=rest_targets,
            external_force=self.forces.for_frame(0),
        )
        self.assembler = CondensedAssembler(
            mesh,
            self.defgrad,
            self.hs_gs[0],
            self.hs_gs[1],
            self.constraints,
            hs_constant=material.model_impl.is_quadratic,
        )
        self.rest_volume = float(mesh.volumes.sum())

    def solve_pose(
        self, pose: PoseFrame, frame_index: int = 0, validate: bool = False
    ) -> FrameSolution:
        t0 = time.perf_counter()
        fk = forward_kinematics(self.skeleton, pose)
        rblocks = build_rotation_blocks(self.clustering, fk.bone_rotations)
        targets = pin_targets(self.pins, fk)
        cons = self.constraints.with_targets(targets)
        force = self.forces.for_frame(frame_index)
        if force is not None:
            cons.external_force = force
        system = self.assembler.assemble(rblocks, cons)
        t1 = time.perf_counter()
        system.factor()
        t2 = time.perf_counter()
        x = solve_frame(system)
        t3 = time.perf_counter()

        vol = mesh_volume(self.mesh, x)
        pin_resid = float(np.abs(x[cons.pinned_dofs] - cons.targets).max())
        report = FrameReport(
            frame=frame_index,
            assemble_time=t1 - t0,
            factor_time=t2 - t1,
            solve_time=t3 - t2,
            volume=vol,
            volume_change_pct=100.0 * (vol - self.rest_volume) / self.rest_volume,
            max_pin_residual=pin_resid,
        )
        if validate:
            report.validation = self._validate(x, rblocks, cons)
        return FrameSolution(positions=x.reshape(-1, 3), report=report)

    def _validate(self, x, rblocks, cons) -> dict:
        s, lam, constraint_resid = recover_multipliers_and_strain(
            x, rblocks, self.hs_gs, self.defgrad
        )
        resid = lagrangian_residuals(
            x, s, lam, rblocks, self.hs_gs, cons, self.defgrad
        )
        out = {
            "stationarity_residual": max(resid["ds"], resid["dx"]),
            "constraint_residual": constraint_resid,
        }
        dim = 12 * self.mesh.num_tets + 3 * self.mesh.num_vertices
        if dim <= 20000:
            kkt = build_full_kkt(
                self.mesh, rblocks.rotations, self.hs_gs, cons
            )
            _, x_kkt, _ = solve_full_kkt(kkt)
            scale = max(float(np.abs(x_kkt).max()), 1e-30)
            out["rel_diff_condensed_vs_kkt"] = float(np.abs(x - x_kkt).max()) / scale
        return out

    def summary(self) -> dict:
        counts = np.bincount(self.clustering.assignment, minlength=self.skeleton.num_bones)
        return {
            "name": self.name,
            "num_vertices": self.mesh.num_vertices,
            "num_tets": self.mesh.num_tets,
            "num_joints": self.skeleton.num_joints,
            "num_bones": self.skeleton.num_bones,
            "num_pins": self.pins.count,
            "clustering_strategy": self.clustering.strategy,
            "cluster_sizes": counts.tolist(),
            "material": self.material.model,
            "stiffness": self.pins.stiffness,
        }


def load_scene(config: RunConfig) -> tuple[Scene, list[PoseFrame]]:
    config.check()
    mesh = load_tet_mesh(config.mesh_path)
    skel, frames = load_rig(config.rig_path)
    material = (
        load_material(config.material_path)
        if config.material_path
        else MaterialParams()
    )
    user_table = (
        load_user_clustering(config.user_table_path, mesh.num_tets)
        if config.user_table_path
        else None
    )
    forces = (
        load_forces(config.forces_path, mesh.num_vertices)
        if config.forces_path
        else None
    )
    scene = Scene(
        mesh,
        skel,
        material,
        clustering_strategy=config.clustering,
        user_table=user_table,
        pin_radius=config.pin_radius,
        stiffness=config.stiffness,
        forces=forces,
        name=os.path.splitext(os.path.basename(config.mesh_path))[0],
    )
    return scene, frames


def run_pipeline(config: RunConfig) -> list[FrameReport]:
    """Solve every frame of the rig animation and export OBJ + manifest."""
    scene, frames = load_scene(config)
    if not frames:
        raise ConfigError("rig file contains no animation frames")
    os.makedirs(config.out_dir, exist_ok=True)

    reports = []
    manifest_frames = []
    for i, pose in enumerate(frames):
        try:
            solution = scene.solve_pose(pose, frame_index=i, validate=config.validate)
        except SolverError as exc:
            raise type(exc)(f"frame {i}: {exc}") from exc
        reports.append(solution.report)
        entry = {
            "index": i,
            "volume": solution.report.volume,
            "volume_change_pct": solution.report.volume_change_pct,
            "max_pin_residual": solution.report.max_pin_residual,
            "times": {
                "assemble": solution.report.assemble_time,
                "factor": solution.report.factor_time,
                "solve": solution.report.solve_time,
            },
        }
        if config.export_obj:
            obj_name = f"frame_{i:04d}.obj"
            write_surface_obj(
                os.path.join(config.out_dir, obj_name), scene.mesh, solution.positions
            )
            entry["obj"] = obj_name
        if solution.report.validation is not None:
            entry["validation"] = solution.report.validation
        manifest_frames.append(entry)
        logger.info(
            "frame %d: %.3fs (assemble %.3f, factor %.3f, solve %.3f), dV %.2f%%",
            i,
            solution.report.total_time,
            solution.report.assemble_time,
            solution.report.factor_time,
            solution.report.solve_time,
            solution.report.volume_change_pct,
        )

    manifest = {
        "scene": scene.summary(),
        "frames": manifest_frames,
    }
    with open(os.path.join(config.out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    if config.validate:
        with open(os.path.join(config.out_dir, "validation.json"), "w") as fh:
            json.dump(
                [
                    {"frame": r.frame, **(r.validation or {})}
                    for r in reports
                ],
                fh,
                indent=1,
            )
    return reports


def emit_timing_table(
    reports: list[FrameReport],
    model: str = "scene",
    num_vertices: int = 0,
    num_tets: int = 0,
    stiffness: float = 0.0,
    csv_path=None,
) -> str:
    """Text table of per-frame timing, one row per run (mean over frames)."""
    if not reports:
        raise ConfigError("no frame reports to tabulate")
    times = [r.total_time for r in reports]
    mean = sum(times) / len(times)
    header = f"{'Model':<16}{'V':>8}{'T':>8}{'Stiffness':>12}{'sec/frame':>12}"
    row = f"{model:<16}{num_vertices:>8}{num_tets:>8}{stiffness:>12.1f}{mean:>12.4f}"
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "V", "T", "stiffness", "sec_per_frame"])
            w.writerow([model, num_vertices, num_tets, stiffness, f"{mean:.6f}"])
    return header + "\n" + row


def write_demo_beam(out_dir, flour_scale: bool = False, frames: int = 10) -> RunConfig:
    """Generate the procedural beam assets (mesh, rig, material) on disk."""
    from .geometry import save_tet_mesh
    from .rig import save_rig

    os.makedirs(out_dir, exist_ok=True)
    mesh = demo.flour_sack_scale_mesh() if flour_scale else demo.beam_mesh()
    skel = demo.beam_skeleton()
    anim = demo.bend_animation(skel, max_angle_deg=95.0, frames=frames)
    mesh_path = os.path.join(out_dir, "beam.mesh")
    rig_path = os.path.join(out_dir, "beam_rig.json")
    mat_path = os.path.join(out_dir, "material.json")
    save_tet_mesh(mesh_path, mesh)
    save_rig(rig_path, skel, anim)
    with open(mat_path, "w") as fh:
        json.dump({"model": "arap", "mu": 1e3, "lambda": 0.0}, fh, indent=1)
    return RunConfig(
        mesh_path=mesh_path,
        rig_path=rig_path,
        material_path=mat_path,
        out_dir=os.path.join(out_dir, "frames"),
    )
