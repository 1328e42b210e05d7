"""Condensed solve vs the independent saddle-point oracle, plus block algebra."""

import numpy as np
import pytest

from mfemskin import demo
from mfemskin.geometry import build_defgrad_operator
from mfemskin.materials import MaterialParams, element_blocks
from mfemskin.rig import PoseFrame, cluster_rotations, forward_kinematics, pin_targets, select_pins
from mfemskin.solver import (
    CondensedAssembler,
    ConstraintSystem,
    SingularSystemError,
    SolverError,
    assemble_condensed,
    build_full_kkt,
    build_rotation_blocks,
    lagrangian_residuals,
    recover_multipliers_and_strain,
    rotation_blocks_from_rotations,
    solve_frame,
    solve_full_kkt,
)
from mfemskin.symvec import SYM_IDENTITY, SYM_WEIGHTS, vec6

from oracles import random_rotation, rotation_block_reference, sym_from_vec


def tet_constraints(mesh, stiffness=1000.0, targets=None, force=None):
    """Pin the first three vertices (non-collinear for every fixture mesh)."""
    idx = np.array([0, 1, 2])
    if targets is None:
        targets = mesh.vertices[idx].ravel()
    return ConstraintSystem(
        num_vertices=mesh.num_vertices,
        pin_indices=idx,
        stiffness=stiffness,
        targets=targets,
        external_force=force,
    )


class TestRotationBlocks:
    def test_block_matches_reference(self, rng):
        for _ in range(20):
            R = random_rotation(rng)
            blocks = rotation_blocks_from_rotations(R[None])
            np.testing.assert_allclose(
                blocks.blocks[0], rotation_block_reference(R), atol=1e-14
            )

    def test_block_maps_symmetric_product(self, rng):
        R = random_rotation(rng)
        blocks = rotation_blocks_from_rotations(R[None])
        s = rng.standard_normal(6)
        np.testing.assert_allclose(
            blocks.blocks[0] @ s, (R @ sym_from_vec(s)).reshape(9), atol=1e-14
        )

    def test_gram_is_constant_diagonal(self, rng):
        """[R]^T [R] = diag(1,1,1,2,2,2) independent of R."""
        R = random_rotation(rng)
        B = rotation_blocks_from_rotations(R[None]).blocks[0]
        np.testing.assert_allclose(B.T @ B, np.diag(SYM_WEIGHTS), atol=1e-13)

    def test_pinv_left_inverse(self, rng):
        blocks = rotation_blocks_from_rotations(
            np.stack([random_rotation(rng) for _ in range(5)])
        )
        prod = np.einsum("kab,kbc->kac", blocks.pinv, blocks.blocks)
        np.testing.assert_allclose(prod, np.tile(np.eye(6), (5, 1, 1)), atol=1e-13)

    def test_pinv_matches_svd_pseudoinverse(self, rng):
        R = random_rotation(rng)
        blocks = rotation_blocks_from_rotations(R[None])
        np.testing.assert_allclose(
            blocks.pinv[0], np.linalg.pinv(blocks.blocks[0]), atol=1e-12
        )

    def test_pinv_extracts_rotated_symmetric_part(self, rng):
        """[R]^+ vec(F) = vec6(sym(R^T F)) for arbitrary F."""
        R = random_rotation(rng)
        blocks = rotation_blocks_from_rotations(R[None])
        F = rng.standard_normal((3, 3))
        lhs = blocks.pinv[0] @ F.reshape(9)
        M = R.T @ F
        np.testing.assert_allclose(lhs, vec6(0.5 * (M + M.T)), atol=1e-14)

    def test_non_orthonormal_rejected(self):
        with pytest.raises(SolverError):
            rotation_blocks_from_rotations(np.eye(3)[None] * 1.5)

    def test_reflection_rejected(self):
        with pytest.raises(SolverError):
            rotation_blocks_from_rotations(np.diag([1.0, 1.0, -1.0])[None])


def identity_blocks(m):
    return rotation_blocks_from_rotations(np.tile(np.eye(3), (m, 1, 1)))


class TestCondensedVsOracle:
    """The condensed SPD solve must match the full saddle-point system."""

    @pytest.mark.parametrize("model", ["arap", "corotational"])
    def test_single_tet_random_rotations(self, single_tet, model, rng):
        params = MaterialParams(model=model, mu=800.0, lam=350.0)
        hs_gs = element_blocks(single_tet, params)
        for _ in range(5):
            R = random_rotation(rng)
            t = 0.3 * rng.standard_normal(3)
            targets = (single_tet.vertices[:3] @ R.T + t).ravel()
            cons = tet_constraints(single_tet, targets=targets)
            rblocks = rotation_blocks_from_rotations(R[None])
            system = assemble_condensed(single_tet, rblocks, hs_gs, cons)
            x = solve_frame(system)
            _, x_kkt, _ = solve_full_kkt(
                build_full_kkt(single_tet, rblocks.rotations, hs_gs, cons)
            )
            scale = max(np.abs(x_kkt).max(), 1e-30)
            assert np.abs(x - x_kkt).max() / scale < 1e-8

    @pytest.mark.parametrize("model", ["arap", "corotational"])
    def test_beam_random_poses(self, beam_mesh, beam_skeleton, model, rng):
        params = MaterialParams(model=model, mu=1e3, lam=200.0)
        hs_gs = element_blocks(beam_mesh, params)
        clustering = cluster_rotations(beam_mesh, beam_skeleton)
        pins = select_pins(beam_mesh, beam_skeleton)
        defgrad = build_defgrad_operator(beam_mesh)
        for _ in range(3):
            q = rng.standard_normal((3, 4))
            pose = PoseFrame(rotations=q, root_translation=0.2 * rng.standard_normal(3))
            fk = forward_kinematics(beam_skeleton, pose)
            rblocks = build_rotation_blocks(clustering, fk.bone_rotations)
            cons = ConstraintSystem(
                num_vertices=beam_mesh.num_vertices,
                pin_indices=pins.indices,
                stiffness=pins.stiffness,
                targets=pin_targets(pins, fk),
            )
            x = solve_frame(
                assemble_condensed(beam_mesh, rblocks, hs_gs, cons, defgrad=defgrad)
            )
            _, x_kkt, _ = solve_full_kkt(
                build_full_kkt(beam_mesh, rblocks.rotations, hs_gs, cons)
            )
            scale = max(np.abs(x_kkt).max(), 1e-30)
            assert np.abs(x - x_kkt).max() / scale < 1e-8

    def test_external_force_path(self, two_tets, rng):
        hs_gs = element_blocks(two_tets, MaterialParams(mu=500.0))
        f = np.zeros(3 * two_tets.num_vertices)
        f[3 * 4 : 3 * 4 + 3] = [0.0, -50.0, 0.0]
        cons = tet_constraints(two_tets, force=f)
        rblocks = identity_blocks(two_tets.num_tets)
        x = solve_frame(assemble_condensed(two_tets, rblocks, hs_gs, cons))
        _, x_kkt, _ = solve_full_kkt(
            build_full_kkt(two_tets, rblocks.rotations, hs_gs, cons)
        )
        np.testing.assert_allclose(x, x_kkt, atol=1e-10)
        # the loaded free vertex actually moves
        assert np.abs(x.reshape(-1, 3)[4] - two_tets.vertices[4]).max() > 1e-4


class TestStationarity:
    def test_gradient_blocks_vanish_at_solution(self, beam_mesh, beam_skeleton, rng):
        params = MaterialParams(model="corotational", mu=1e3, lam=300.0)
        hs_gs = element_blocks(beam_mesh, params)
        clustering = cluster_rotations(beam_mesh, beam_skeleton)
        pins = select_pins(beam_mesh, beam_skeleton)
        defgrad = build_defgrad_operator(beam_mesh)
        pose = demo.bend_pose(beam_skeleton, np.deg2rad(70))
        fk = forward_kinematics(beam_skeleton, pose)
        rblocks = build_rotation_blocks(clustering, fk.bone_rotations)
        cons = ConstraintSystem(
            num_vertices=beam_mesh.num_vertices,
            pin_indices=pins.indices,
            stiffness=pins.stiffness,
            targets=pin_targets(pins, fk),
        )
        system = assemble_condensed(beam_mesh, rblocks, hs_gs, cons, defgrad=defgrad)
        x = solve_frame(system)
        s, lam, _ = recover_multipliers_and_strain(x, rblocks, hs_gs, defgrad)
        resid = lagrangian_residuals(x, s, lam, rblocks, hs_gs, cons, defgrad)
        bnorm = np.linalg.norm(system.b)
        assert resid["ds"] < 1e-6 * bnorm
        assert resid["dx"] < 1e-6 * bnorm

    def test_recovered_strain_at_rest_is_identity(self, beam_mesh):
        hs_gs = element_blocks(beam_mesh, MaterialParams())
        defgrad = build_defgrad_operator(beam_mesh)
        rblocks = identity_blocks(beam_mesh.num_tets)
        s, _, resid = recover_multipliers_and_strain(
            beam_mesh.vertices.ravel(), rblocks, hs_gs, defgrad
        )
        np.testing.assert_allclose(
            s.reshape(-1, 6), np.tile(SYM_IDENTITY, (beam_mesh.num_tets, 1)), atol=1e-12
        )
        assert resid < 1e-12


class TestInvariances:
    def test_rest_preservation(self, beam_mesh, beam_skeleton):
        """Identity pose with rest targets returns the rest positions."""
        hs_gs = element_blocks(beam_mesh, MaterialParams())
        pins = select_pins(beam_mesh, beam_skeleton)
        cons = ConstraintSystem(
            num_vertices=beam_mesh.num_vertices,
            pin_indices=pins.indices,
            stiffness=pins.stiffness,
            targets=pins.rest_positions.ravel(),
        )
        rblocks = identity_blocks(beam_mesh.num_tets)
        x = solve_frame(assemble_condensed(beam_mesh, rblocks, hs_gs, cons))
        assert np.abs(x - beam_mesh.vertices.ravel()).max() < 1e-6

    def test_rigid_invariance(self, beam_mesh, beam_skeleton, rng):
        """A common rotation plus rigidly moved pins yields the rigid motion."""
        hs_gs = element_blocks(beam_mesh, MaterialParams(model="arap", mu=1e3))
        pins = select_pins(beam_mesh, beam_skeleton)
        R = random_rotation(rng)
        t = np.array([0.5, -1.0, 2.0])
        cons = ConstraintSystem(
            num_vertices=beam_mesh.num_vertices,
            pin_indices=pins.indices,
            stiffness=pins.stiffness,
            targets=(pins.rest_positions @ R.T + t).ravel(),
        )
        rblocks = rotation_blocks_from_rotations(
            np.tile(R, (beam_mesh.num_tets, 1, 1))
        )
        x = solve_frame(assemble_condensed(beam_mesh, rblocks, hs_gs, cons))
        expected = (beam_mesh.vertices @ R.T + t).ravel()
        assert np.abs(x - expected).max() < 1e-6

    def test_superposition_of_forces(self, beam_mesh, beam_skeleton, rng):
        """Responses to loads add: x(f1+f2) - rest = (x(f1)-rest) + (x(f2)-rest)."""
        hs_gs = element_blocks(beam_mesh, MaterialParams())
        pins = select_pins(beam_mesh, beam_skeleton)
        rblocks = identity_blocks(beam_mesh.num_tets)
        defgrad = build_defgrad_operator(beam_mesh)

        def solve_with(force):
            cons = ConstraintSystem(
                num_vertices=beam_mesh.num_vertices,
                pin_indices=pins.indices,
                stiffness=pins.stiffness,
                targets=pins.rest_positions.ravel(),
                external_force=force,
            )
            return solve_frame(
                assemble_condensed(beam_mesh, rblocks, hs_gs, cons, defgrad=defgrad)
            )

        n3 = 3 * beam_mesh.num_vertices
        f1 = 40.0 * rng.standard_normal(n3)
        f2 = 40.0 * rng.standard_normal(n3)
        rest = solve_with(None)
        lhs = solve_with(f1 + f2) - rest
        rhs = (solve_with(f1) - rest) + (solve_with(f2) - rest)
        scale = max(np.abs(lhs).max(), 1e-30)
        assert np.abs(lhs - rhs).max() / scale < 1e-8

    def test_solve_is_deterministic(self, beam_mesh, beam_skeleton):
        hs_gs = element_blocks(beam_mesh, MaterialParams())
        pins = select_pins(beam_mesh, beam_skeleton)
        pose = demo.bend_pose(beam_skeleton, 0.5)
        fk = forward_kinematics(beam_skeleton, pose)
        clustering = cluster_rotations(beam_mesh, beam_skeleton)

        def run():
            rblocks = build_rotation_blocks(clustering, fk.bone_rotations)
            cons = ConstraintSystem(
                num_vertices=beam_mesh.num_vertices,
                pin_indices=pins.indices,
                stiffness=pins.stiffness,
                targets=pin_targets(pins, fk),
            )
            return solve_frame(assemble_condensed(beam_mesh, rblocks, hs_gs, cons))

        a, b = run(), run()
        assert (a == b).all()


class TestSingularities:
    def test_no_pins_no_force_rejected(self, single_tet):
        hs_gs = element_blocks(single_tet, MaterialParams())
        cons = ConstraintSystem(
            num_vertices=4, pin_indices=np.array([], dtype=int), stiffness=1e3,
            targets=np.array([]),
        )
        with pytest.raises(SingularSystemError):
            CondensedAssembler(
                single_tet,
                build_defgrad_operator(single_tet),
                hs_gs[0],
                hs_gs[1],
                cons,
            )

    def test_single_point_pin_is_singular(self, single_tet):
        """One point pin leaves rotations about the pin at zero energy."""
        hs_gs = element_blocks(single_tet, MaterialParams())
        cons = ConstraintSystem(
            num_vertices=4,
            pin_indices=np.array([0]),
            stiffness=1e3,
            targets=single_tet.vertices[0],
        )
        rblocks = identity_blocks(1)
        system = assemble_condensed(single_tet, rblocks, hs_gs, cons)
        with pytest.raises(SingularSystemError):
            solve_frame(system)

    def test_mismatched_constraint_size(self, single_tet, two_tets):
        hs_gs = element_blocks(single_tet, MaterialParams())
        cons = tet_constraints(two_tets)
        with pytest.raises(SolverError):
            CondensedAssembler(
                single_tet,
                build_defgrad_operator(single_tet),
                hs_gs[0],
                hs_gs[1],
                cons,
            )


class TestMultiplierRecovery:
    def test_skew_residual_reported_not_enforced(self, beam_mesh, beam_skeleton):
        """Cluster disagreement shows up in the constraint residual only."""
        hs_gs = element_blocks(beam_mesh, MaterialParams())
        clustering = cluster_rotations(beam_mesh, beam_skeleton)
        pins = select_pins(beam_mesh, beam_skeleton)
        defgrad = build_defgrad_operator(beam_mesh)
        pose = demo.bend_pose(beam_skeleton, np.deg2rad(90))
        fk = forward_kinematics(beam_skeleton, pose)
        rblocks = build_rotation_blocks(clustering, fk.bone_rotations)
        cons = ConstraintSystem(
            num_vertices=beam_mesh.num_vertices,
            pin_indices=pins.indices,
            stiffness=pins.stiffness,
            targets=pin_targets(pins, fk),
        )
        x = solve_frame(
            assemble_condensed(beam_mesh, rblocks, hs_gs, cons, defgrad=defgrad)
        )
        s, lam, resid = recover_multipliers_and_strain(x, rblocks, hs_gs, defgrad)
        diag = lagrangian_residuals(x, s, lam, rblocks, hs_gs, cons, defgrad)
        # the enforced blocks vanish; the projected-out skew part does not
        assert diag["ds"] < 1e-8 and diag["dx"] < 1e-8
        assert resid > 1e-3
        assert diag["dlam"] == pytest.approx(resid)

    def test_oracle_strain_matches_recovery(self, single_tet, rng):
        """s from the saddle solve equals [R]^+ B x from the condensed path."""
        hs_gs = element_blocks(single_tet, MaterialParams(mu=700.0))
        R = random_rotation(rng)
        targets = (single_tet.vertices[:3] @ R.T).ravel()
        cons = tet_constraints(single_tet, targets=targets)
        rblocks = rotation_blocks_from_rotations(R[None])
        defgrad = build_defgrad_operator(single_tet)
        x = solve_frame(assemble_condensed(single_tet, rblocks, hs_gs, cons, defgrad=defgrad))
        s, _, _ = recover_multipliers_and_strain(x, rblocks, hs_gs, defgrad)
        s_kkt, x_kkt, _ = solve_full_kkt(
            build_full_kkt(single_tet, rblocks.rotations, hs_gs, cons)
        )
        np.testing.assert_allclose(s, s_kkt, atol=1e-9)

    def test_oracle_dimension_limit(self, single_tet):
        hs_gs = element_blocks(single_tet, MaterialParams())
        kkt = build_full_kkt(single_tet, np.eye(3)[None], hs_gs, tet_constraints(single_tet))
        with pytest.raises(SolverError):
            solve_full_kkt(kkt, oracle_limit=10)
