"""Mobility-aware site-specific mmWave ray-tracing channel simulator.

Subpackages and modules:
    geometry      meshes, object templates, footprint extrusion
    materials     electromagnetic material table
    scenario      scenario files, scene composition
    mobility      flow simulation and trace ingestion
    rt            BVH, Fresnel model, image-method tracer
    orchestrator  per-snapshot episode loop and dataset serialization
    bench         realism-vs-runtime benchmark matrix
    cli           command-line entry point
"""

__version__ = "0.1.0"

from .geometry import (
    CUBE_FACE_COUNT,
    DETAILED_FACE_COUNT,
    Face,
    Mesh,
    ObjectTemplate,
    Pose,
    Vec3,
    builtin_templates,
    extrude_footprint,
    instantiate,
)
from .materials import Material, default_materials
from .mobility import (
    ActorState,
    FlowSpec,
    Road,
    RoadNetwork,
    Snapshot,
    Trace,
    parse_trace,
    simulate_flows,
    snapshot_at,
    write_trace,
)
from .rt import RTConfig, trace_channel
from .scenario import (
    Bounds,
    FixedReceivers,
    MobileReceivers,
    Scenario,
    Scene,
    compose_scene,
    load_scenario,
    total_face_count,
)
