"""Mesh structure, deformation-gradient operator, and file I/O."""

import numpy as np
import pytest

from mfemskin import demo
from mfemskin.geometry import (
    DegenerateElementError,
    MeshError,
    MeshParseError,
    TetMesh,
    boundary_faces,
    build_defgrad_operator,
    element_assembly_indices,
    load_tet_mesh,
    mesh_volume,
    rest_identity_check,
    save_tet_mesh,
    signed_volumes,
    write_surface_obj,
)
from mfemskin.symvec import vec9

from oracles import boundary_faces_reference, defgrad_reference, tet_volume_reference


class TestTetMesh:
    def test_volumes_match_triple_product(self, two_tets):
        for k, tet in enumerate(two_tets.tets):
            a, b, c, d = two_tets.vertices[tet]
            assert two_tets.volumes[k] == pytest.approx(
                tet_volume_reference(a, b, c, d), rel=1e-14
            )

    def test_negative_orientation_is_repaired(self, single_tet):
        flipped = TetMesh(
            vertices=single_tet.vertices.copy(), tets=np.array([[0, 2, 1, 3]])
        )
        assert signed_volumes(flipped.vertices, flipped.tets)[0] > 0
        assert flipped.volumes[0] == pytest.approx(single_tet.volumes[0])

    def test_out_of_range_index_rejected(self, single_tet):
        with pytest.raises(MeshError):
            TetMesh(vertices=single_tet.vertices, tets=np.array([[0, 1, 2, 4]]))

    def test_degenerate_tet_rejected(self):
        vertices = np.array(
            [[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0], [0.5, 0.5, 0.0]]
        )
        with pytest.raises(DegenerateElementError):
            TetMesh(vertices=vertices, tets=np.array([[0, 1, 2, 3]]))

    def test_beam_volume_is_box_volume(self):
        mesh = demo.beam_mesh(length=4.0, width=1.0, height=1.0, nx=4, ny=2, nz=2)
        assert mesh.volumes.sum() == pytest.approx(4.0, rel=1e-12)

    def test_barycenters(self, single_tet):
        np.testing.assert_allclose(
            single_tet.barycenters()[0], single_tet.vertices.mean(axis=0)
        )


class TestBoundaryFaces:
    def test_single_tet_has_four_faces(self, single_tet):
        assert len(single_tet.surface_faces) == 4

    def test_two_tets_share_one_face(self, two_tets):
        faces = boundary_faces(two_tets.tets)
        assert len(faces) == 6
        keys = {tuple(sorted(f)) for f in faces}
        assert keys == boundary_faces_reference(two_tets.tets)

    def test_faces_wind_outward(self, two_tets):
        center = two_tets.vertices.mean(axis=0)
        for f in two_tets.surface_faces:
            a, b, c = two_tets.vertices[f]
            normal = np.cross(b - a, c - a)
            assert np.dot(normal, (a + b + c) / 3 - center) > 0

    def test_beam_face_count(self, beam_mesh):
        # each boundary quad of the box splits into two triangles
        nx, ny, nz = 4, 2, 2
        quads = 2 * (nx * ny + nx * nz + ny * nz)
        assert len(beam_mesh.surface_faces) == 2 * quads


class TestDefGradOperator:
    def test_rest_positions_give_identity(self, beam_mesh):
        op = build_defgrad_operator(beam_mesh)
        assert rest_identity_check(beam_mesh, op) < 1e-12

    def test_affine_map_is_reproduced_exactly(self, two_tets, rng):
        """F must equal the affine matrix A for positions x = A X + b."""
        A = rng.standard_normal((3, 3)) + 2 * np.eye(3)
        b = rng.standard_normal(3)
        positions = two_tets.vertices @ A.T + b
        op = build_defgrad_operator(two_tets)
        F = op.deformation_gradients(positions.ravel()).reshape(-1, 3, 3)
        for Fk in F:
            np.testing.assert_allclose(Fk, A, atol=1e-13)

    def test_matches_per_element_reference(self, beam_mesh, rng):
        positions = beam_mesh.vertices + 0.1 * rng.standard_normal(
            beam_mesh.vertices.shape
        )
        op = build_defgrad_operator(beam_mesh)
        F = op.deformation_gradients(positions.ravel()).reshape(-1, 3, 3)
        np.testing.assert_allclose(
            F, defgrad_reference(beam_mesh.vertices, beam_mesh.tets, positions),
            atol=1e-12,
        )

    def test_sparse_matrix_agrees_with_element_maps(self, two_tets, rng):
        op = build_defgrad_operator(two_tets)
        x = rng.standard_normal(3 * two_tets.num_vertices)
        via_matrix = op.matrix @ x
        gathered = x.reshape(-1, 3)[two_tets.tets].reshape(-1, 12)
        via_blocks = np.einsum("kab,kb->ka", op.element_maps, gathered).ravel()
        np.testing.assert_allclose(via_matrix, via_blocks, atol=1e-14)

    def test_linearity_in_positions(self, single_tet, rng):
        op = build_defgrad_operator(single_tet)
        x1 = rng.standard_normal(12)
        x2 = rng.standard_normal(12)
        np.testing.assert_allclose(
            op.deformation_gradients(x1 + x2),
            op.deformation_gradients(x1) + op.deformation_gradients(x2),
            atol=1e-13,
        )


def test_element_assembly_indices(two_tets):
    rows, cols = element_assembly_indices(two_tets.tets, 3)
    assert rows.shape == cols.shape
    # row blocks advance 3 per element, columns gather the tet's 12 dofs
    assert rows.min() == 0 and rows.max() == 3 * 2 - 1
    assert set(cols[rows < 3]) == {3 * v + i for v in two_tets.tets[0] for i in range(3)}


def test_mesh_volume_under_deformation(beam_mesh):
    doubled = beam_mesh.vertices * 2.0
    assert mesh_volume(beam_mesh, doubled.ravel()) == pytest.approx(
        8 * beam_mesh.volumes.sum(), rel=1e-12
    )


class TestMeshIO:
    def test_round_trip_exact(self, tmp_path, beam_mesh):
        path = tmp_path / "beam.mesh"
        save_tet_mesh(path, beam_mesh)
        loaded = load_tet_mesh(path)
        np.testing.assert_array_equal(loaded.vertices, beam_mesh.vertices)
        np.testing.assert_array_equal(loaded.tets, beam_mesh.tets)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.mesh"
        path.write_text(
            "MeshVersionFormatted 2\nDimension 3\nVertices\n2\n0 0 0 0\nnot a number\n"
        )
        with pytest.raises(MeshParseError) as err:
            load_tet_mesh(path)
        assert err.value.line_no == 6

    def test_missing_tetrahedra_section(self, tmp_path):
        path = tmp_path / "noverts.mesh"
        path.write_text("MeshVersionFormatted 2\nDimension 3\nVertices\n1\n0 0 0 0\nEnd\n")
        with pytest.raises(MeshParseError):
            load_tet_mesh(path)

    def test_one_based_indices(self, tmp_path, single_tet):
        path = tmp_path / "tet.mesh"
        save_tet_mesh(path, single_tet)
        text = path.read_text()
        assert "1 2 3 4 0" in text

    def test_unknown_sections_are_skipped(self, tmp_path, single_tet):
        path = tmp_path / "extra.mesh"
        save_tet_mesh(path, single_tet)
        text = path.read_text().replace(
            "Tetrahedra", "Triangles\n1\n1 2 3 0\nTetrahedra"
        )
        path.write_text(text)
        loaded = load_tet_mesh(path)
        assert loaded.num_tets == 1


class TestObjExport:
    def test_counts_and_indexing(self, tmp_path, two_tets):
        path = tmp_path / "out.obj"
        write_surface_obj(path, two_tets)
        lines = path.read_text().splitlines()
        v_lines = [l for l in lines if l.startswith("v ")]
        f_lines = [l for l in lines if l.startswith("f ")]
        assert len(v_lines) == two_tets.num_vertices
        assert len(f_lines) == len(two_tets.surface_faces)
        for l in f_lines:
            idx = [int(t) for t in l.split()[1:]]
            assert all(1 <= i <= two_tets.num_vertices for i in idx)

    def test_deformed_positions_substituted(self, tmp_path, single_tet):
        path = tmp_path / "moved.obj"
        moved = single_tet.vertices + [10.0, 0.0, 0.0]
        write_surface_obj(path, single_tet, moved)
        first = path.read_text().splitlines()[0]
        assert first.split()[1] == "10"

    def test_deterministic_bytes(self, tmp_path, beam_mesh, rng):
        positions = beam_mesh.vertices + 0.01 * rng.standard_normal(
            beam_mesh.vertices.shape
        )
        p1, p2 = tmp_path / "a.obj", tmp_path / "b.obj"
        write_surface_obj(p1, beam_mesh, positions)
        write_surface_obj(p2, beam_mesh, positions)
        assert p1.read_bytes() == p2.read_bytes()
