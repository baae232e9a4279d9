import math

import numpy as np
import pytest

from mobiray.errors import GeometryError
from mobiray.geometry import (
    CUBE_FACE_COUNT,
    DETAILED_FACE_COUNT,
    Mesh,
    Pose,
    Vec3,
    builtin_templates,
    extrude_footprint,
    instantiate,
    template_index,
)

UNIT_SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]


class TestExtrudeFootprint:
    def test_unit_square_face_count(self):
        mesh = extrude_footprint(UNIT_SQUARE, 1.0, "concrete")
        assert mesh.face_count == 10  # 8 wall + 2 roof

    def test_triangle_face_count(self):
        mesh = extrude_footprint([[0, 0], [4, 0], [2, 3]], 5.0, "concrete")
        assert mesh.face_count == 7  # 6 wall + 1 roof

    @pytest.mark.parametrize("n_vertices", [3, 4, 5, 6, 8])
    def test_convex_ngon_face_count(self, n_vertices):
        angles = np.linspace(0.0, 2.0 * math.pi, n_vertices, endpoint=False)
        poly = np.stack([10.0 * np.cos(angles), 10.0 * np.sin(angles)], axis=1)
        mesh = extrude_footprint(poly, 12.0, "concrete")
        assert mesh.face_count == 2 * n_vertices + (n_vertices - 2)

    def test_clockwise_rejected(self):
        with pytest.raises(GeometryError, match="clockwise"):
            extrude_footprint(list(reversed(UNIT_SQUARE)), 1.0, "concrete")

    def test_nonconvex_rejected(self):
        poly = [[0, 0], [4, 0], [4, 4], [2, 1], [0, 4]]
        with pytest.raises(GeometryError, match="convex"):
            extrude_footprint(poly, 1.0, "concrete")

    def test_nonpositive_height_rejected(self):
        with pytest.raises(ValueError, match="height"):
            extrude_footprint(UNIT_SQUARE, 0.0, "concrete")

    def test_no_floor_faces(self):
        mesh = extrude_footprint(UNIT_SQUARE, 2.0, "concrete")
        # Walls touch z = 0 but no face lies entirely in the ground plane.
        flat_bottom = np.all(np.abs(mesh.vertices[:, :, 2]) < 1e-12, axis=1)
        assert not flat_bottom.any()

    def test_wall_normals_point_outward(self):
        mesh = extrude_footprint(UNIT_SQUARE, 1.0, "concrete")
        center = np.array([0.5, 0.5, 0.5])
        for tri in mesh.vertices:
            n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
            assert n @ (tri.mean(axis=0) - center) > 0


class TestInstantiate:
    def test_identity_pose(self):
        template = template_index()[("car", "cube")]
        out = instantiate(template, Pose(Vec3(0, 0, 0), 0.0))
        np.testing.assert_array_equal(out.vertices, template.mesh.vertices)

    def test_quarter_turn(self):
        # Rotating (1, 0, 0) by pi/2 about z gives (0, 1, 0).
        template = template_index()[("car", "cube")]
        rotated = instantiate(template, Pose(Vec3(0, 0, 0), math.pi / 2))
        src = template.mesh.vertices.reshape(-1, 3)
        dst = rotated.vertices.reshape(-1, 3)
        expected = np.stack([-src[:, 1], src[:, 0], src[:, 2]], axis=1)
        np.testing.assert_allclose(dst, expected, atol=1e-12)

    def test_translation_moves_bounding_box(self):
        template = template_index()[("car", "cube")]
        out = instantiate(template, Pose(Vec3(10, 5, 0), 0.0))
        shift = out.vertices - template.mesh.vertices
        np.testing.assert_allclose(shift.reshape(-1, 3), [[10, 5, 0]] * (12 * 3), atol=0)

    def test_rigid_motion_preserves_distances_and_areas(self):
        rng = np.random.default_rng(7)
        templates = builtin_templates()
        for _ in range(50):
            template = templates[rng.integers(len(templates))]
            pose = Pose(Vec3(*rng.uniform(-100, 100, 2), 0.0), rng.uniform(0, 2 * math.pi))
            out = instantiate(template, pose)
            src = template.mesh.vertices
            dst = out.vertices
            d_src = np.linalg.norm(src[:, 0] - src[:, 1], axis=1)
            d_dst = np.linalg.norm(dst[:, 0] - dst[:, 1], axis=1)
            np.testing.assert_allclose(d_dst, d_src, rtol=1e-9)
            a_src = 0.5 * np.linalg.norm(np.cross(src[:, 1] - src[:, 0], src[:, 2] - src[:, 0]), axis=1)
            a_dst = 0.5 * np.linalg.norm(np.cross(dst[:, 1] - dst[:, 0], dst[:, 2] - dst[:, 0]), axis=1)
            np.testing.assert_allclose(a_dst, a_src, rtol=1e-9)

    def test_face_count_and_materials_conserved(self):
        for template in builtin_templates():
            out = instantiate(template, Pose(Vec3(3, -4, 0), 1.1))
            assert out.face_count == template.mesh.face_count
            assert sorted(out.materials) == sorted(template.mesh.materials)


class TestBuiltinTemplates:
    def test_eight_templates(self):
        templates = builtin_templates()
        assert len(templates) == 8
        assert {(t.kind, t.variant) for t in templates} == {
            (k, v) for k in ("car", "bus", "truck", "pedestrian") for v in ("detailed", "cube")
        }

    def test_cube_variants(self):
        for template in builtin_templates():
            if template.variant != "cube":
                continue
            assert template.face_count == CUBE_FACE_COUNT
            assert len(set(template.mesh.materials)) == 1
            expected = "body" if template.kind == "pedestrian" else "metal"
            assert template.mesh.materials[0] == expected

    def test_detailed_face_counts_match_constants(self):
        # [DERIVED] by enumerating the faces of the constructed meshes.
        for template in builtin_templates():
            if template.variant == "detailed":
                assert template.face_count == DETAILED_FACE_COUNT[template.kind]
                assert template.face_count > CUBE_FACE_COUNT

    def test_detailed_car_materials(self):
        car = template_index()[("car", "detailed")]
        glass = sum(1 for m in car.mesh.materials if m == "glass")
        metal = sum(1 for m in car.mesh.materials if m == "metal")
        assert glass >= 2
        assert metal >= 10

    def test_windshield_is_slanted_glass(self):
        for kind in ("car", "bus", "truck"):
            template = template_index()[(kind, "detailed")]
            glass_faces = [template.mesh.vertices[i] for i, m in enumerate(template.mesh.materials)
                           if m == "glass"]
            assert glass_faces
            for tri in glass_faces:
                n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
                n = n / np.linalg.norm(n)
                assert n[2] > 0.05  # tilted up
                assert n[0] > 0.1   # facing forward

    def test_local_frame_on_ground(self):
        for template in builtin_templates():
            z = template.mesh.vertices[:, :, 2]
            assert z.min() >= -1e-12
            assert math.isclose(z.max(), template.height, rel_tol=1e-12)

    def test_bounding_dimensions(self):
        for template in builtin_templates():
            v = template.mesh.vertices.reshape(-1, 3)
            assert math.isclose(v[:, 0].max() - v[:, 0].min(), template.length, rel_tol=1e-12)
            assert math.isclose(v[:, 1].max() - v[:, 1].min(), template.width, rel_tol=1e-12)
