"""Triangle meshes, placeable object templates, and footprint extrusion.

Coordinate convention: right-handed frame, z up, ground plane at z = 0,
all lengths in meters. Object templates live in a local frame with the
origin at ground-center and +x pointing forward; ``instantiate`` maps them
into the world via a yaw rotation plus translation.

The triangle face is the unit of both geometric realism and ray-tracing
cost, so meshes are stored as flat ``(n, 3, 3)`` vertex arrays with a
parallel list of material names, which is what the tracer consumes.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .constants import MIN_FACE_AREA
from .errors import GeometryError

KINDS = ("car", "bus", "truck", "pedestrian")
VARIANTS = ("detailed", "cube")

#: Faces in every cube-variant template (axis-aligned box, 6 quads).
CUBE_FACE_COUNT = 12

#: Faces in each detailed-variant template, fixed by the procedural
#: construction in this module (box body plus a bottomless cabin prism for
#: vehicles, torso box plus bottomless head box for pedestrians).
DETAILED_FACE_COUNT = {"car": 22, "bus": 22, "truck": 22, "pedestrian": 22}

#: Default bounding dimensions (length, width, height) per kind, meters.
DEFAULT_DIMENSIONS = {
    "car": (4.5, 1.8, 1.5),
    "bus": (12.0, 2.5, 3.2),
    "truck": (8.0, 2.5, 3.5),
    "pedestrian": (0.5, 0.5, 1.7),
}


@dataclass(frozen=True)
class Vec3:
    """Point or direction in the world frame, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        # Coerce numpy scalars so repr/JSON formatting stays plain.
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "z", float(self.z))
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite Vec3 component: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


def as_point(value) -> np.ndarray:
    """Coerce a Vec3 or length-3 sequence to a float ndarray."""
    if isinstance(value, Vec3):
        return value.as_array()
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Face:
    """Single triangle with a material reference."""

    vertices: np.ndarray  # (3, 3)
    material_id: str

    @property
    def area(self) -> float:
        a, b, c = self.vertices
        return 0.5 * float(np.linalg.norm(np.cross(b - a, c - a)))


class Mesh:
    """Ordered triangle soup with per-face materials.

    Stores faces as one ``(n, 3, 3)`` array plus a parallel material-name
    list. Instances are immutable after construction and safe to share
    across tracing workers.
    """

    __slots__ = ("vertices", "materials")

    def __init__(self, vertices: np.ndarray, materials: list[str]):
        vertices = np.array(vertices, dtype=float)  # own the data; frozen below
        if vertices.ndim != 3 or vertices.shape[1:] != (3, 3):
            raise GeometryError(f"mesh vertices must have shape (n, 3, 3), got {vertices.shape}")
        if vertices.shape[0] < 1:
            raise GeometryError("mesh must contain at least one face")
        if len(materials) != vertices.shape[0]:
            raise GeometryError(
                f"material list length {len(materials)} does not match face count {vertices.shape[0]}"
            )
        if not np.all(np.isfinite(vertices)):
            raise GeometryError("mesh contains non-finite vertices")
        areas = 0.5 * np.linalg.norm(
            np.cross(vertices[:, 1] - vertices[:, 0], vertices[:, 2] - vertices[:, 0]), axis=1
        )
        degenerate = np.nonzero(areas <= MIN_FACE_AREA)[0]
        if degenerate.size:
            raise GeometryError(f"degenerate face (area <= {MIN_FACE_AREA} m^2) at index {degenerate[0]}")
        vertices.setflags(write=False)
        self.vertices = vertices
        self.materials = list(materials)

    @property
    def face_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def faces(self) -> list[Face]:
        return [Face(self.vertices[i], self.materials[i]) for i in range(self.face_count)]

    def translated(self, offset) -> "Mesh":
        return Mesh(self.vertices + as_point(offset), self.materials)


@dataclass(frozen=True)
class Pose:
    """Placement of a template: world position plus yaw about z.

    ``heading`` is normalized into [0, 2*pi); 0 means the template's +x
    axis points along world +x.
    """

    position: Vec3
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", float(self.heading) % (2.0 * math.pi))


@dataclass(frozen=True)
class ObjectTemplate:
    """Procedural vehicle or pedestrian mesh in its local frame.

    Invariants: the cube variant is a 12-face single-material box; detailed
    variants have more than 12 faces, and vehicles carry at least two
    distinct materials. All local vertices satisfy z >= 0.
    """

    name: str
    kind: str
    variant: str
    mesh: Mesh
    length: float
    width: float
    height: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if np.min(self.mesh.vertices[:, :, 2]) < -1e-12:
            raise GeometryError(f"template {self.name!r} has vertices below z = 0")
        n_mats = len(set(self.mesh.materials))
        if self.variant == "cube":
            if self.mesh.face_count != CUBE_FACE_COUNT or n_mats != 1:
                raise GeometryError(f"cube template {self.name!r} must be a 12-face single-material box")
        else:
            if self.mesh.face_count <= CUBE_FACE_COUNT:
                raise GeometryError(f"detailed template {self.name!r} must exceed 12 faces")
            if self.kind != "pedestrian" and n_mats < 2:
                raise GeometryError(f"detailed vehicle template {self.name!r} needs >= 2 materials")

    @property
    def face_count(self) -> int:
        return self.mesh.face_count


def _quad(a, b, c, d, material: str) -> list[tuple[np.ndarray, str]]:
    """Split a planar quad (CCW as seen from its outward normal) into two triangles."""
    a, b, c, d = (np.asarray(p, dtype=float) for p in (a, b, c, d))
    return [(np.stack([a, b, c]), material), (np.stack([a, c, d]), material)]


def _mesh_from(parts: list[tuple[np.ndarray, str]]) -> Mesh:
    return Mesh(np.stack([tri for tri, _ in parts]), [m for _, m in parts])


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def extrude_footprint(footprint, height: float, material_id: str) -> Mesh:
    """Extrude a convex CCW footprint polygon into walls plus a roof.

    Produces two wall triangles per edge and a roof triangle fan; no floor
    faces are emitted because rays never approach from below the ground
    plane. A convex polygon with V vertices therefore yields
    ``2 V + (V - 2)`` faces.

    Args:
        footprint: Sequence of (x, y) vertices, counter-clockwise, convex.
        height: Extrusion height in meters, > 0.
        material_id: Material name applied to every emitted face.

    Raises:
        GeometryError: Clockwise, non-convex, or degenerate footprints.
        ValueError: ``height <= 0``.
    """
    if height <= 0.0:
        raise ValueError(f"extrusion height must be > 0, got {height}")
    poly = np.asarray(footprint, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
        raise GeometryError(f"footprint must be an (n >= 3, 2) point list, got shape {poly.shape}")
    if not np.all(np.isfinite(poly)):
        raise GeometryError("footprint contains non-finite coordinates")
    area = _signed_area(poly)
    if area < 0.0:
        raise GeometryError("footprint winding is clockwise; vertices must be counter-clockwise")
    if area <= MIN_FACE_AREA:
        raise GeometryError("footprint encloses no area")
    # Strict convexity also rules out self-intersection and repeated points.
    nxt = np.roll(poly, -1, axis=0)
    prv = np.roll(poly, 1, axis=0)
    cross = (poly[:, 0] - prv[:, 0]) * (nxt[:, 1] - poly[:, 1]) - (poly[:, 1] - prv[:, 1]) * (
        nxt[:, 0] - poly[:, 0]
    )
    if np.any(cross <= 0.0):
        idx = int(np.argmin(cross))
        raise GeometryError(f"footprint is not strictly convex at vertex {idx}")

    n = poly.shape[0]
    lo = np.concatenate([poly, np.zeros((n, 1))], axis=1)
    hi = np.concatenate([poly, np.full((n, 1), float(height))], axis=1)
    parts: list[tuple[np.ndarray, str]] = []
    for i in range(n):
        j = (i + 1) % n
        parts.extend(_quad(lo[i], lo[j], hi[j], hi[i], material_id))
    for i in range(1, n - 1):
        parts.append((np.stack([hi[0], hi[i], hi[i + 1]]), material_id))
    return _mesh_from(parts)


def instantiate(template: ObjectTemplate, pose: Pose) -> Mesh:
    """Place a template into the world: yaw rotation about z then translation.

    Face order, face count, and per-face materials are preserved.
    """
    cos_h = math.cos(pose.heading)
    sin_h = math.sin(pose.heading)
    rot = np.array([[cos_h, -sin_h, 0.0], [sin_h, cos_h, 0.0], [0.0, 0.0, 1.0]])
    verts = template.mesh.vertices @ rot.T + pose.position.as_array()
    return Mesh(verts, template.mesh.materials)


def _box_faces(length, width, height, material, z0=0.0) -> list[tuple[np.ndarray, str]]:
    """Axis-aligned box footprint centered at the origin, outward normals."""
    hx, hy = length / 2.0, width / 2.0
    z1 = z0 + height
    parts = []
    parts += _quad((hx, -hy, z0), (hx, hy, z0), (hx, hy, z1), (hx, -hy, z1), material)      # +x
    parts += _quad((-hx, hy, z0), (-hx, -hy, z0), (-hx, -hy, z1), (-hx, hy, z1), material)  # -x
    parts += _quad((hx, hy, z0), (-hx, hy, z0), (-hx, hy, z1), (hx, hy, z1), material)      # +y
    parts += _quad((-hx, -hy, z0), (hx, -hy, z0), (hx, -hy, z1), (-hx, -hy, z1), material)  # -y
    parts += _quad((-hx, -hy, z1), (hx, -hy, z1), (hx, hy, z1), (-hx, hy, z1), material)    # top
    parts += _quad((-hx, hy, z0), (hx, hy, z0), (hx, -hy, z0), (-hx, -hy, z0), material)    # bottom
    return parts


def _cabin_faces(x_rear, x_front_base, x_front_top, y_half, z_base, z_top,
                 body_material, glass_material) -> list[tuple[np.ndarray, str]]:
    """Bottomless prism with a trapezoidal x-z cross-section.

    The slanted front quad is the windshield and carries the glass
    material; rear wall, roof, and both end caps are bodywork. 5 quads,
    10 triangles.
    """
    yl, yr = -y_half, y_half
    parts = []
    parts += _quad((x_front_base, yl, z_base), (x_front_base, yr, z_base),
                   (x_front_top, yr, z_top), (x_front_top, yl, z_top), glass_material)
    parts += _quad((x_rear, yr, z_base), (x_rear, yl, z_base),
                   (x_rear, yl, z_top), (x_rear, yr, z_top), body_material)
    parts += _quad((x_rear, yl, z_top), (x_front_top, yl, z_top),
                   (x_front_top, yr, z_top), (x_rear, yr, z_top), body_material)
    parts += _quad((x_front_base, yr, z_base), (x_rear, yr, z_base),
                   (x_rear, yr, z_top), (x_front_top, yr, z_top), body_material)
    parts += _quad((x_rear, yl, z_base), (x_front_base, yl, z_base),
                   (x_front_top, yl, z_top), (x_rear, yl, z_top), body_material)
    return parts


# Cabin prism placement per vehicle kind: fractions are measured in meters
# from the rear (x_rear) and front (windshield base/top) of the body box.
_CABIN_LAYOUT = {
    # kind: (body_height, rear_inset, front_base_inset, front_top_inset, side_inset)
    "car": (0.9, 0.7, 1.1, 1.7, 0.1),
    "bus": (1.8, 0.3, 0.15, 0.55, 0.1),
    "truck": (1.6, 0.4, 0.5, 1.3, 0.1),
}


def _detailed_vehicle(kind: str, dims: tuple[float, float, float]) -> Mesh:
    length, width, height = dims
    body_h, rear_in, front_base_in, front_top_in, side_in = _CABIN_LAYOUT[kind]
    parts = _box_faces(length, width, body_h, "metal")
    parts += _cabin_faces(
        x_rear=-length / 2.0 + rear_in,
        x_front_base=length / 2.0 - front_base_in,
        x_front_top=length / 2.0 - front_top_in,
        y_half=width / 2.0 - side_in,
        z_base=body_h,
        z_top=height,
        body_material="metal",
        glass_material="glass",
    )
    return _mesh_from(parts)


def _detailed_pedestrian(dims: tuple[float, float, float]) -> Mesh:
    length, width, height = dims
    torso_h = height - 0.25
    head = 0.3
    parts = _box_faces(length, width, torso_h, "body")
    # Head box without its hidden bottom quad.
    hx, hy = head / 2.0, head / 2.0
    z0, z1 = torso_h, height
    parts += _quad((hx, -hy, z0), (hx, hy, z0), (hx, hy, z1), (hx, -hy, z1), "body")
    parts += _quad((-hx, hy, z0), (-hx, -hy, z0), (-hx, -hy, z1), (-hx, hy, z1), "body")
    parts += _quad((hx, hy, z0), (-hx, hy, z0), (-hx, hy, z1), (hx, hy, z1), "body")
    parts += _quad((-hx, -hy, z0), (hx, -hy, z0), (hx, -hy, z1), (-hx, -hy, z1), "body")
    parts += _quad((-hx, -hy, z1), (hx, -hy, z1), (hx, hy, z1), (-hx, hy, z1), "body")
    return _mesh_from(parts)


def builtin_templates(dimensions: dict[str, tuple[float, float, float]] | None = None) -> list[ObjectTemplate]:
    """Build the 8 built-in object templates: 4 kinds x {detailed, cube}.

    Cube variants are single-material bounding boxes (metal for vehicles,
    dielectric body for pedestrians). Detailed vehicles add a cabin prism
    whose slanted front face is glass; the detailed pedestrian stacks a
    head box on the torso. Pass ``dimensions`` to override the default
    (length, width, height) per kind.
    """
    dims_by_kind = dict(DEFAULT_DIMENSIONS)
    if dimensions:
        dims_by_kind.update(dimensions)
    templates = []
    for kind in KINDS:
        dims = dims_by_kind[kind]
        cube_mat = "body" if kind == "pedestrian" else "metal"
        cube_mesh = _mesh_from(_box_faces(dims[0], dims[1], dims[2], cube_mat))
        templates.append(ObjectTemplate(f"{kind}_cube", kind, "cube", cube_mesh, *dims))
        if kind == "pedestrian":
            detailed_mesh = _detailed_pedestrian(dims)
        else:
            detailed_mesh = _detailed_vehicle(kind, dims)
        templates.append(ObjectTemplate(f"{kind}_detailed", kind, "detailed", detailed_mesh, *dims))
    return templates


def template_index(templates: list[ObjectTemplate] | None = None) -> dict[tuple[str, str], ObjectTemplate]:
    """Index templates by (kind, variant)."""
    if templates is None:
        templates = builtin_templates()
    return {(t.kind, t.variant): t for t in templates}
