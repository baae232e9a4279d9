import io
import math

import pytest

from mobiray.errors import ConfigError, GeometryError, SchemaError
from mobiray.geometry import Vec3
from mobiray.mobility import ActorState, Snapshot
from mobiray.scenario import (
    FixedReceivers,
    MobileReceivers,
    compose_scene,
    load_scenario,
    parse_scenario,
    total_face_count,
)

BASIC = {
    "bounds": {"x_min": 0.0, "y_min": 0.0, "x_max": 100.0, "y_max": 100.0},
    "buildings": [
        {"footprint": [[10, 10], [30, 10], [30, 30], [10, 30]], "height": 12.0,
         "material": "concrete"},
    ],
    "roads": [
        {"id": "main", "polyline": [[0, 50], [100, 50]], "speed_limit": 14.0},
    ],
}


def snapshot(*actors):
    return Snapshot(time=0.0, actors=list(actors))


def car(actor_id, x, y, heading=0.0):
    return ActorState(actor_id, "car", Vec3(x, y, 0.0), heading, 5.0)


class TestParseScenario:
    def test_basic(self):
        scenario = parse_scenario(BASIC)
        assert scenario.buildings[0].face_count == 10
        assert scenario.ground.face_count == 2
        assert "main" in scenario.roads.roads
        assert scenario.materials["glass"].rel_permittivity == 6.27

    def test_unknown_top_level_key(self):
        data = dict(BASIC, vegetation=[])
        with pytest.raises(SchemaError, match="'vegetation'"):
            parse_scenario(data)

    def test_unknown_building_key(self):
        data = dict(BASIC, buildings=[dict(BASIC["buildings"][0], color="red")])
        with pytest.raises(SchemaError, match="'color'"):
            parse_scenario(data)

    def test_unknown_material_reference(self):
        data = dict(BASIC, buildings=[dict(BASIC["buildings"][0], material="adobe")])
        with pytest.raises(SchemaError, match="adobe"):
            parse_scenario(data)

    def test_nonconvex_footprint_names_building(self):
        bad = {"footprint": [[0, 0], [20, 0], [20, 20], [10, 5], [0, 20]],
               "height": 5.0, "material": "concrete"}
        data = dict(BASIC, buildings=[BASIC["buildings"][0], bad])
        with pytest.raises(GeometryError, match=r"buildings\[1\]"):
            parse_scenario(data)

    def test_building_outside_bounds(self):
        bad = {"footprint": [[90, 90], [120, 90], [120, 120], [90, 120]],
               "height": 5.0, "material": "concrete"}
        data = dict(BASIC, buildings=[bad])
        with pytest.raises(GeometryError, match="outside"):
            parse_scenario(data)

    def test_material_override(self):
        data = dict(BASIC, materials=[
            {"name": "concrete", "rel_permittivity": 7.0, "conductivity": 0.1}])
        scenario = parse_scenario(data)
        assert scenario.materials["concrete"].rel_permittivity == 7.0

    def test_load_from_stream(self):
        text = """
bounds: {x_min: 0.0, y_min: 0.0, x_max: 50.0, y_max: 50.0}
buildings:
  - footprint: [[5, 5], [15, 5], [15, 15], [5, 15]]
    height: 8.0
    material: concrete
roads:
  - id: r
    polyline: [[0, 25], [50, 25]]
    speed_limit: 10.0
"""
        scenario = load_scenario(io.StringIO(text))
        assert scenario.bounds.x_max == 50.0


class TestComposeScene:
    def setup_method(self):
        self.scenario = parse_scenario(BASIC)
        self.tx = [("tx0", Vec3(50.0, 50.0, 10.0))]
        self.rx = FixedReceivers([("rx0", Vec3(60.0, 50.0, 1.5))])

    def test_counts_and_added_faces(self):
        snap = snapshot(car("c1", 40, 50), car("c2", 50, 50), car("c3", 60, 50),
                        ActorState("p1", "pedestrian", Vec3(70.0, 50.0, 0.0), 0.0, 1.0))
        scene = compose_scene(self.scenario, snap, "cube", self.tx, self.rx)
        assert len(scene.placed_objects) == 4
        added = sum(p.template.face_count for p in scene.placed_objects)
        assert added == 48  # 4 x 12

    def test_total_face_count(self):
        snap = snapshot(car("c1", 40, 50), car("c2", 50, 50))
        scene = compose_scene(self.scenario, snap, "cube", self.tx, self.rx)
        assert total_face_count(scene) == 10 + 2 + 24
        empty = compose_scene(self.scenario, snapshot(), "cube", self.tx, self.rx)
        assert total_face_count(empty) == 12

    def test_detailed_exceeds_cube(self):
        snap = snapshot(car("c1", 40, 50), car("c2", 60, 60))
        cube = compose_scene(self.scenario, snap, "cube", self.tx, self.rx)
        detailed = compose_scene(self.scenario, snap, "detailed", self.tx, self.rx)
        assert total_face_count(detailed) > total_face_count(cube)

    def test_mobile_receivers(self):
        snap = snapshot(car("c1", 40, 50), car("c2", 60, 50),
                        ActorState("p1", "pedestrian", Vec3(70.0, 50.0, 0.0), 0.0, 1.0))
        scene = compose_scene(self.scenario, snap, "cube", self.tx,
                              MobileReceivers(kinds=["car"], height_offset=1.5))
        assert len(scene.rx_positions) == 2
        for (rx_id, pos), expected_x in zip(scene.rx_positions, (40.0, 60.0)):
            assert pos.z == 1.5
            assert pos.x == expected_x

    def test_empty_snapshot_keeps_fixed_receivers(self):
        scene = compose_scene(self.scenario, snapshot(), "cube", self.tx, self.rx)
        assert scene.placed_objects == []
        assert [r[0] for r in scene.rx_positions] == ["rx0"]

    def test_out_of_bounds_skip_warns(self, caplog):
        snap = snapshot(car("c1", 40, 50), car("far", 500, 500))
        with caplog.at_level("WARNING"):
            scene = compose_scene(self.scenario, snap, "cube", self.tx, self.rx)
        assert len(scene.placed_objects) == 1
        assert any("far" in r.message for r in caplog.records)

    def test_out_of_bounds_clamp(self):
        snap = snapshot(car("far", 500, 50))
        scene = compose_scene(self.scenario, snap, "cube", self.tx, self.rx,
                              out_of_bounds="clamp")
        assert len(scene.placed_objects) == 1
        assert scene.placed_objects[0].pose.position.x == 100.0

    def test_unknown_kind_error(self):
        bad = ActorState("m1", "car", Vec3(40.0, 50.0, 0.0), 0.0, 1.0)
        object.__setattr__(bad, "kind", "moped")
        with pytest.raises(ConfigError, match="moped"):
            compose_scene(self.scenario, snapshot(bad), "cube", self.tx, self.rx)

    def test_mobile_rx_positions_track_actors_exactly(self):
        snap = snapshot(car("c1", 41.25, 50.5))
        scene = compose_scene(self.scenario, snap, "cube", self.tx,
                              MobileReceivers(kinds=["car"], height_offset=1.5))
        (rx_id, pos), = scene.rx_positions
        assert (pos.x, pos.y) == (41.25, 50.5)
        assert pos.z == 1.5
