"""Command-line interface.

Batch runs call the pipeline directly; serve hands the loaded scene to the
FastAPI service.  Exit codes: 0 success, 2 configuration problems (missing
or malformed inputs, bad parameters), 3 numerical failure during a solve.
"""

from __future__ import annotations

import json
import logging
import os
import sys

import click

from .geometry import MeshError
from .materials import MaterialConfigError
from .pipeline import (
    ConfigError,
    RunConfig,
    Scene,
    emit_timing_table,
    load_scene,
    run_pipeline,
    write_demo_beam,
)
from .rig import CLUSTER_STRATEGIES, RigError
from .solver import SolverError

CONFIG_ERRORS = (
    ConfigError,
    MeshError,
    RigError,
    MaterialConfigError,
    json.JSONDecodeError,
    OSError,
)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log per-frame progress.")
def main(verbose):
    """Physics-based character skinning: mixed stretch/position solves driven by a rig."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _run_checked(config: RunConfig):
    try:
        return run_pipeline(config)
    except CONFIG_ERRORS as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    except SolverError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(3)


@main.command()
@click.option("--mesh", "mesh_path", required=True, type=click.Path(), help="MEDIT .mesh file.")
@click.option("--rig", "rig_path", required=True, type=click.Path(), help="Skeleton + animation JSON.")
@click.option("--material", "material_path", type=click.Path(), default=None, help="Material JSON.")
@click.option(
    "--clustering",
    type=click.Choice(CLUSTER_STRATEGIES),
    default="bone",
    show_default=True,
    help="Per-element rotation assignment strategy.",
)
@click.option("--user-table", type=click.Path(), default=None, help="Per-tet bone table for --clustering user.")
@click.option("--pin-radius", type=float, default=None, help="Pin capture radius (default: 1.5x mean surface edge).")
@click.option("--ks", type=float, default=1000.0, show_default=True, help="Pin penalty stiffness.")
@click.option("--forces", "forces_path", type=click.Path(), default=None, help="External force JSON.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--validate", is_flag=True, help="Cross-check each frame against the saddle-point oracle.")
@click.option("--timing-csv", type=click.Path(), default=None, help="Also write the timing row as CSV.")
def run(mesh_path, rig_path, material_path, clustering, user_table, pin_radius, ks,
        forces_path, out_dir, validate, timing_csv):
    """Solve every animation frame and export deformed surface OBJs."""
    config = RunConfig(
        mesh_path=mesh_path,
        rig_path=rig_path,
        material_path=material_path,
        clustering=clustering,
        user_table_path=user_table,
        pin_radius=pin_radius,
        stiffness=ks,
        forces_path=forces_path,
        out_dir=out_dir,
        validate=validate,
    )
    reports = _run_checked(config)
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        scene_info = json.load(fh)["scene"]
    click.echo(
        emit_timing_table(
            reports,
            model=scene_info["name"],
            num_vertices=scene_info["num_vertices"],
            num_tets=scene_info["num_tets"],
            stiffness=scene_info["stiffness"],
            csv_path=timing_csv,
        )
    )
    click.echo(f"wrote {len(reports)} frames to {out_dir}")


@main.command()
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--mesh", "mesh_path", type=click.Path(), default=None,
              help="Scene mesh; omit to serve the procedural demo beam.")
@click.option("--rig", "rig_path", type=click.Path(), default=None)
@click.option("--material", "material_path", type=click.Path(), default=None)
@click.option("--clustering", type=click.Choice(CLUSTER_STRATEGIES), default="bone", show_default=True)
@click.option("--user-table", type=click.Path(), default=None)
@click.option("--pin-radius", type=float, default=None)
@click.option("--ks", type=float, default=1000.0, show_default=True)
@click.option("--frontend", "frontend_dir", type=click.Path(), default=None,
              help="Static UI directory to mount at /ui (default: ./frontend/dist if present).")
def serve(port, host, mesh_path, rig_path, material_path, clustering, user_table,
          pin_radius, ks, frontend_dir):
    """Host the interactive pose service (GET /scene, WS /pose)."""
    import uvicorn

    from .service import create_app

    try:
        scene = _build_serve_scene(
            mesh_path, rig_path, material_path, clustering, user_table, pin_radius, ks
        )
    except CONFIG_ERRORS as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)

    if frontend_dir is None:
        candidate = os.path.join(os.getcwd(), "frontend", "dist")
        frontend_dir = candidate if os.path.isdir(candidate) else None
    app = create_app(scene, static_dir=frontend_dir)
    if frontend_dir:
        click.echo(f"UI: http://{host}:{port}/ui/")
    uvicorn.run(app, host=host, port=port, log_level="info")


def _build_serve_scene(mesh_path, rig_path, material_path, clustering, user_table,
                       pin_radius, ks) -> Scene:
    if mesh_path is None and rig_path is None:
        from . import demo

        click.echo("no --mesh/--rig given; serving the procedural demo beam")
        return Scene(
            demo.beam_mesh(),
            demo.beam_skeleton(),
            demo.beam_material(),
            clustering_strategy=clustering,
            pin_radius=pin_radius,
            stiffness=ks,
            name="demo-beam",
        )
    if mesh_path is None or rig_path is None:
        raise ConfigError("--mesh and --rig must be given together")
    config = RunConfig(
        mesh_path=mesh_path,
        rig_path=rig_path,
        material_path=material_path,
        clustering=clustering,
        user_table_path=user_table,
        pin_radius=pin_radius,
        stiffness=ks,
    )
    scene, _frames = load_scene(config)
    return scene


@main.command("demo-beam")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--frames", default=10, show_default=True, type=int)
@click.option("--flour-scale", is_flag=True, help="Benchmark-sized beam (~11.7k tets).")
@click.option("--validate", is_flag=True, help="Cross-check frames against the saddle-point oracle.")
def demo_beam(out_dir, frames, flour_scale, validate):
    """Generate the procedural two-bone beam scene and solve its bend animation."""
    try:
        config = write_demo_beam(out_dir, flour_scale=flour_scale, frames=frames)
    except OSError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    config.validate = validate and not flour_scale
    reports = _run_checked(config)
    mesh_name = "beam-flour" if flour_scale else "beam"
    with open(os.path.join(config.out_dir, "manifest.json")) as fh:
        scene_info = json.load(fh)["scene"]
    click.echo(
        emit_timing_table(
            reports,
            model=mesh_name,
            num_vertices=scene_info["num_vertices"],
            num_tets=scene_info["num_tets"],
            stiffness=scene_info["stiffness"],
        )
    )
    click.echo(f"assets in {out_dir}, frames in {config.out_dir}")


if __name__ == "__main__":
    main()
