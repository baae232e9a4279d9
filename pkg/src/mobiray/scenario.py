"""Static world assembly and per-snapshot scene composition.

A scenario is loaded from a YAML file holding bounds, a material table,
extruded building footprints, and the road network. Unknown keys anywhere
in the file are rejected by name, so typos fail loudly instead of being
silently ignored. Scene composition then drops the actors of one mobility
snapshot into the scenario as placed object templates and resolves the
transmitter and receiver sites.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
import yaml

from .errors import ConfigError, GeometryError, SchemaError
from .geometry import (
    Mesh,
    ObjectTemplate,
    Pose,
    Vec3,
    extrude_footprint,
    instantiate,
    template_index,
)
from .materials import Material, default_materials
from .mobility import Road, RoadNetwork, Snapshot

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned 2D region."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise SchemaError("bounds must satisfy x_max > x_min and y_max > y_min")

    def contains(self, x: float, y: float, tol: float = 0.0) -> bool:
        return (
            self.x_min - tol <= x <= self.x_max + tol
            and self.y_min - tol <= y <= self.y_max + tol
        )

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        return (
            min(max(x, self.x_min), self.x_max),
            min(max(y, self.y_min), self.y_max),
        )


@dataclass(frozen=True)
class Scenario:
    """Static world: materials, extruded buildings, ground, and roads."""

    bounds: Bounds
    materials: dict[str, Material]
    buildings: list[Mesh]
    ground: Mesh
    roads: RoadNetwork
    ground_material: str = "asphalt"

    def validate(self) -> None:
        for name in ("metal", "glass", "body", self.ground_material):
            if name not in self.materials:
                raise SchemaError(f"material table is missing required material {name!r}")
        for b_idx, mesh in enumerate(self.buildings):
            for mat in set(mesh.materials):
                if mat not in self.materials:
                    raise SchemaError(f"building {b_idx} references unknown material {mat!r}")
            xy = mesh.vertices[:, :, :2].reshape(-1, 2)
            for x, y in xy:
                if not self.bounds.contains(x, y, tol=1e-9):
                    raise GeometryError(f"building {b_idx} extends outside the scenario bounds")


@dataclass(frozen=True)
class FixedReceivers:
    """Receivers at fixed world positions."""

    sites: list[tuple[str, Vec3]]


@dataclass(frozen=True)
class MobileReceivers:
    """Receivers attached to every actor of the given kinds, at a height
    offset above the actor position."""

    kinds: frozenset
    height_offset: float

    def __init__(self, kinds, height_offset: float):
        object.__setattr__(self, "kinds", frozenset(kinds))
        object.__setattr__(self, "height_offset", float(height_offset))


@dataclass(frozen=True)
class PlacedObject:
    template: ObjectTemplate
    pose: Pose
    actor_id: str


@dataclass
class Scene:
    """One snapshot of the world: scenario plus placed actors and antennas."""

    scenario: Scenario
    placed_objects: list[PlacedObject]
    tx_positions: list[tuple[str, Vec3]]
    rx_positions: list[tuple[str, Vec3]]
    time: float
    _arrays: tuple | None = field(default=None, repr=False, compare=False)

    def build_arrays(self) -> tuple[np.ndarray, list[str], list[str]]:
        """Flatten the scene into (vertices (n,3,3), material names, owner tags).

        Owners are ``ground``, ``building<i>``, or the placing actor id;
        the tracer uses them only for diagnostics.
        """
        if self._arrays is None:
            chunks = [self.scenario.ground.vertices]
            mats = list(self.scenario.ground.materials)
            owners = ["ground"] * self.scenario.ground.face_count
            for i, mesh in enumerate(self.scenario.buildings):
                chunks.append(mesh.vertices)
                mats.extend(mesh.materials)
                owners.extend([f"building{i}"] * mesh.face_count)
            for placed in self.placed_objects:
                mesh = instantiate(placed.template, placed.pose)
                chunks.append(mesh.vertices)
                mats.extend(mesh.materials)
                owners.extend([placed.actor_id] * mesh.face_count)
            self._arrays = (np.concatenate(chunks, axis=0), mats, owners)
        return self._arrays

    @property
    def material_table(self) -> dict[str, Material]:
        return self.scenario.materials


def total_face_count(scene: Scene) -> int:
    """Faces summed over ground, buildings, and placed objects."""
    count = scene.scenario.ground.face_count
    count += sum(m.face_count for m in scene.scenario.buildings)
    count += sum(p.template.face_count for p in scene.placed_objects)
    return count


def compose_scene(scenario: Scenario, snapshot: Snapshot, variant: str,
                  tx_sites: list[tuple[str, Vec3]], rx_spec,
                  templates: dict[tuple[str, str], ObjectTemplate] | None = None,
                  out_of_bounds: str = "skip") -> Scene:
    """Compose a traceable scene from one mobility snapshot.

    One object is placed per actor, selecting the template by
    (kind, variant). Receivers are either the fixed list from ``rx_spec``
    or, for ``MobileReceivers``, one per matching actor at the configured
    height offset. Actors outside the scenario bounds are skipped with a
    warning by default, or clamped when ``out_of_bounds='clamp'``.
    """
    if out_of_bounds not in ("skip", "clamp"):
        raise ConfigError(f"out_of_bounds must be 'skip' or 'clamp', got {out_of_bounds!r}")
    if templates is None:
        templates = template_index()
    placed: list[PlacedObject] = []
    rx_sites: list[tuple[str, Vec3]] = []
    for actor in snapshot.actors:
        key = (actor.kind, variant)
        if key not in templates:
            raise ConfigError(f"no template for kind {actor.kind!r} variant {variant!r}")
        x, y = actor.position.x, actor.position.y
        if not scenario.bounds.contains(x, y):
            if out_of_bounds == "skip":
                log.warning("actor %s at (%.2f, %.2f) outside bounds; skipped", actor.actor_id, x, y)
                continue
            x, y = scenario.bounds.clamp(x, y)
            log.warning("actor %s clamped to bounds at (%.2f, %.2f)", actor.actor_id, x, y)
        pose = Pose(Vec3(x, y, actor.position.z), actor.heading)
        placed.append(PlacedObject(templates[key], pose, actor.actor_id))
        if isinstance(rx_spec, MobileReceivers) and actor.kind in rx_spec.kinds:
            rx_sites.append((f"rx_{actor.actor_id}",
                             Vec3(x, y, actor.position.z + rx_spec.height_offset)))
    if isinstance(rx_spec, FixedReceivers):
        rx_sites = list(rx_spec.sites)
    elif not isinstance(rx_spec, MobileReceivers):
        raise ConfigError(f"rx_spec must be FixedReceivers or MobileReceivers, got {type(rx_spec)!r}")
    for name, sites in (("tx", tx_sites), ("rx", rx_sites)):
        for site_id, pos in sites:
            if pos.z <= 0:
                raise ConfigError(f"{name} {site_id!r} must be above ground (z > 0), got z={pos.z}")
    return Scene(scenario, placed, list(tx_sites), rx_sites, snapshot.time)


# --- scenario file parsing -------------------------------------------------

_BOUNDS_KEYS = {"x_min", "y_min", "x_max", "y_max"}
_MATERIAL_KEYS = {"name", "rel_permittivity", "conductivity", "perfect_conductor"}
_BUILDING_KEYS = {"footprint", "height", "material"}
_ROAD_KEYS = {"id", "polyline", "speed_limit"}
_TOP_KEYS = {"bounds", "materials", "buildings", "roads", "ground_material"}


def _check_keys(mapping: dict, allowed: set, where: str) -> None:
    if not isinstance(mapping, dict):
        raise SchemaError(f"{where} must be a mapping, got {type(mapping).__name__}")
    for key in mapping:
        if key not in allowed:
            raise SchemaError(f"unknown key {key!r} in {where}")


def parse_scenario(data: dict) -> Scenario:
    """Build and validate a Scenario from parsed YAML data."""
    _check_keys(data, _TOP_KEYS, "scenario")
    if "bounds" not in data:
        raise SchemaError("scenario is missing required key 'bounds'")
    _check_keys(data["bounds"], _BOUNDS_KEYS, "bounds")
    missing = _BOUNDS_KEYS - set(data["bounds"])
    if missing:
        raise SchemaError(f"bounds is missing key {sorted(missing)[0]!r}")
    bounds = Bounds(**{k: float(v) for k, v in data["bounds"].items()})

    materials = default_materials()
    for m_idx, entry in enumerate(data.get("materials") or []):
        _check_keys(entry, _MATERIAL_KEYS, f"materials[{m_idx}]")
        if "name" not in entry:
            raise SchemaError(f"materials[{m_idx}] is missing 'name'")
        try:
            mat = Material(
                name=str(entry["name"]),
                rel_permittivity=float(entry.get("rel_permittivity", 1.0)),
                conductivity=float(entry.get("conductivity", 0.0)),
                perfect_conductor=bool(entry.get("perfect_conductor", False)),
            )
        except ValueError as exc:
            raise SchemaError(f"materials[{m_idx}]: {exc}") from None
        materials[mat.name] = mat

    ground_material = str(data.get("ground_material", "asphalt"))
    if ground_material not in materials:
        raise SchemaError(f"ground_material {ground_material!r} is not in the material table")

    buildings: list[Mesh] = []
    for b_idx, entry in enumerate(data.get("buildings") or []):
        _check_keys(entry, _BUILDING_KEYS, f"buildings[{b_idx}]")
        for req in ("footprint", "height", "material"):
            if req not in entry:
                raise SchemaError(f"buildings[{b_idx}] is missing {req!r}")
        mat = str(entry["material"])
        if mat not in materials:
            raise SchemaError(f"buildings[{b_idx}] references unknown material {mat!r}")
        try:
            buildings.append(extrude_footprint(entry["footprint"], float(entry["height"]), mat))
        except (GeometryError, ValueError) as exc:
            raise GeometryError(f"buildings[{b_idx}]: {exc}") from None

    roads = []
    for r_idx, entry in enumerate(data.get("roads") or []):
        _check_keys(entry, _ROAD_KEYS, f"roads[{r_idx}]")
        for req in ("id", "polyline", "speed_limit"):
            if req not in entry:
                raise SchemaError(f"roads[{r_idx}] is missing {req!r}")
        roads.append(Road(str(entry["id"]), np.asarray(entry["polyline"], dtype=float),
                          float(entry["speed_limit"])))

    ground = _ground_mesh(bounds, ground_material)
    scenario = Scenario(bounds, materials, buildings, ground, RoadNetwork(roads), ground_material)
    scenario.validate()
    return scenario


def _ground_mesh(bounds: Bounds, material: str) -> Mesh:
    a = np.array([bounds.x_min, bounds.y_min, 0.0])
    b = np.array([bounds.x_max, bounds.y_min, 0.0])
    c = np.array([bounds.x_max, bounds.y_max, 0.0])
    d = np.array([bounds.x_min, bounds.y_max, 0.0])
    return Mesh(np.stack([np.stack([a, b, c]), np.stack([a, c, d])]), [material, material])


def load_scenario(source) -> Scenario:
    """Load a scenario from a YAML file path or an open stream."""
    if hasattr(source, "read"):
        data = yaml.safe_load(source.read())
    else:
        with open(source, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh.read())
    if not isinstance(data, dict):
        raise SchemaError("scenario file must contain a top-level mapping")
    return parse_scenario(data)
