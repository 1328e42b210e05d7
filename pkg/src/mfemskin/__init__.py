"""mfemskin: physics-based character skinning.

Rig rotations drive per-element frames; each pose is one sparse SPD solve
for vertex positions with symmetric stretches eliminated in closed form.
No skinning weights anywhere.
"""

from .geometry import (
    DefGradOperator,
    DegenerateElementError,
    MeshError,
    MeshParseError,
    TetMesh,
    build_defgrad_operator,
    load_tet_mesh,
    mesh_volume,
    save_tet_mesh,
    write_surface_obj,
)
from .materials import (
    MaterialConfigError,
    MaterialOverride,
    MaterialParams,
    element_blocks,
    load_material,
)
from .pipeline import (
    ConfigError,
    FrameReport,
    FrameSolution,
    RunConfig,
    Scene,
    emit_timing_table,
    load_scene,
    run_pipeline,
    write_demo_beam,
)
from .rig import (
    CLUSTER_STRATEGIES,
    Joint,
    PinSet,
    PoseFrame,
    RigError,
    RotationClustering,
    Skeleton,
    cluster_rotations,
    forward_kinematics,
    load_rig,
    pin_targets,
    select_pins,
)
from .solver import (
    CondensedAssembler,
    ConstraintSystem,
    RotationBlocks,
    SingularSystemError,
    SolverError,
    assemble_condensed,
    build_full_kkt,
    build_rotation_blocks,
    recover_multipliers_and_strain,
    solve_frame,
    solve_full_kkt,
)

__version__ = "0.1.0"
