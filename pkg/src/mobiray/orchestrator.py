"""Episode loop: compose scene per snapshot, trace all links, record runtime.

The episode walks the mobility trace at a configurable stride, composes a
scene for each selected snapshot, traces every (tx, rx) link, and wraps
the results with wall-clock timing metadata. Per-scene runtime covers
acceleration-structure construction and tracing only; scene composition
and serialization stay outside the timed section so runtimes compare the
ray-tracing work alone.

Datasets are line-delimited JSON: a header record with format version,
config echo, and totals, then one self-contained record per scene. Floats
are serialized with round-trip-exact formatting, so load(serialize(x))
reproduces every field bit for bit. Path records carry the angle, delay,
and gain fields of each path; vertex chains are a tracing-time artifact
and are not part of the dataset schema.
"""

from dataclasses import asdict, dataclass, field
from concurrent.futures import ThreadPoolExecutor
import cmath
import json
import logging
import math
import statistics
import time

from .errors import ConfigError, EpisodeFormatError, SchemaError, VersionMismatchError
from .geometry import Vec3, template_index
from .mobility import FlowSpec, Snapshot, Trace, parse_trace, simulate_flows
from .rt import RTConfig, build_index, trace_channel
from .scenario import (
    FixedReceivers,
    MobileReceivers,
    Scenario,
    compose_scene,
    load_scenario,
    total_face_count,
)

log = logging.getLogger(__name__)

FORMAT_NAME = "mobiray-episode"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class FlowTraceSpec:
    """Generate the trace by simulating flows."""

    flows: list[FlowSpec]
    t_end: float
    dt: float
    seed: int = 0


@dataclass(frozen=True)
class FileTraceSpec:
    """Read the trace from a CSV file."""

    path: str


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything needed to run one episode."""

    scenario: Scenario | str
    trace: FlowTraceSpec | FileTraceSpec | Trace
    tx_sites: list[tuple[str, Vec3]]
    rx_spec: FixedReceivers | MobileReceivers
    variant: str = "cube"
    snapshot_stride: int = 1
    rt: RTConfig = field(default_factory=RTConfig)
    worker_count: int = 1
    output: str | None = None

    def __post_init__(self):
        if not self.tx_sites:
            raise ConfigError("at least one transmitter is required")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        if self.worker_count < 1:
            raise ConfigError("worker_count must be >= 1")
        if self.variant not in ("detailed", "cube"):
            raise ConfigError(f"variant must be 'detailed' or 'cube', got {self.variant!r}")


@dataclass(frozen=True)
class PathRecord:
    """Dataset view of one propagation path."""

    length: float
    delay: float
    gain_db: float
    gain_phase_rad: float
    aod_az: float
    aod_el: float
    aoa_az: float
    aoa_el: float
    reflection_count: int


@dataclass(frozen=True)
class LinkRecord:
    """Dataset view of one traced (tx, rx) link."""

    tx_id: str
    rx_id: str
    los_blocked: bool
    total_power_noncoherent_db: float
    total_power_coherent_db: float
    paths: list[PathRecord]


@dataclass(frozen=True)
class ActorRecord:
    actor_id: str
    kind: str
    x: float
    y: float
    heading: float
    speed: float


@dataclass(frozen=True)
class SceneRecord:
    scene_index: int
    time: float
    actors: list[ActorRecord]
    total_face_count: int
    links: list[LinkRecord]
    runtime_s: float


@dataclass(frozen=True)
class EpisodeTotals:
    scene_count: int
    total_runtime_s: float
    runtime_mean_s: float
    runtime_std_s: float


@dataclass(frozen=True)
class EpisodeResult:
    config: dict
    records: list[SceneRecord]
    totals: EpisodeTotals


def _config_echo(config: EpisodeConfig) -> dict:
    if isinstance(config.trace, FlowTraceSpec):
        trace_desc = {
            "flows": [asdict(f) for f in config.trace.flows],
            "t_end": config.trace.t_end,
            "dt": config.trace.dt,
            "seed": config.trace.seed,
        }
    elif isinstance(config.trace, FileTraceSpec):
        trace_desc = {"file": config.trace.path}
    else:
        trace_desc = {"inline_snapshots": len(config.trace.snapshots)}
    if isinstance(config.rx_spec, FixedReceivers):
        rx_desc = {"fixed": [{"id": i, "position": [p.x, p.y, p.z]} for i, p in config.rx_spec.sites]}
    else:
        rx_desc = {"mobile": {"kinds": sorted(config.rx_spec.kinds),
                              "height_offset": config.rx_spec.height_offset}}
    return {
        "scenario": config.scenario if isinstance(config.scenario, str) else "<in-memory>",
        "trace": trace_desc,
        "snapshot_stride": config.snapshot_stride,
        "variant": config.variant,
        "transmitters": [{"id": i, "position": [p.x, p.y, p.z]} for i, p in config.tx_sites],
        "receivers": rx_desc,
        "rt": {
            "frequency": config.rt.frequency,
            "max_reflection_order": config.rt.max_reflection_order,
            "max_paths": config.rt.max_paths,
            "polarization": config.rt.polarization,
        },
        "worker_count": config.worker_count,
    }


def _resolve_trace(config: EpisodeConfig, scenario: Scenario) -> Trace:
    if isinstance(config.trace, Trace):
        return config.trace
    if isinstance(config.trace, FlowTraceSpec):
        return simulate_flows(scenario.roads, config.trace.flows, config.trace.t_end,
                              config.trace.dt, config.trace.seed)
    with open(config.trace.path, "r", encoding="utf-8", newline="") as fh:
        return parse_trace(fh)


def _link_record(result) -> LinkRecord:
    paths = [
        PathRecord(
            length=p.length,
            delay=p.delay,
            gain_db=p.gain_db,
            gain_phase_rad=cmath.phase(p.gain),
            aod_az=p.aod[0],
            aod_el=p.aod[1],
            aoa_az=p.aoa[0],
            aoa_el=p.aoa[1],
            reflection_count=p.reflection_count,
        )
        for p in result.paths
    ]
    return LinkRecord(
        tx_id=result.tx_id,
        rx_id=result.rx_id,
        los_blocked=result.los_blocked,
        total_power_noncoherent_db=result.total_power_noncoherent_db,
        total_power_coherent_db=result.total_power_coherent_db,
        paths=paths,
    )


def run_episode(config: EpisodeConfig) -> EpisodeResult:
    """Run the per-snapshot loop and return the full episode dataset.

    Channel outputs are deterministic given the config regardless of
    ``worker_count``; only the measured runtimes vary run to run. When
    ``config.output`` is set the result is also serialized there, with a
    summary CSV next to it.
    """
    scenario = config.scenario if isinstance(config.scenario, Scenario) else load_scenario(config.scenario)
    trace = _resolve_trace(config, scenario)
    if not trace.snapshots:
        raise ConfigError("trace contains no snapshots")
    selected = trace.snapshots[:: config.snapshot_stride]
    templates = template_index()

    records: list[SceneRecord] = []
    any_links = False
    for scene_index, snapshot in enumerate(selected):
        scene = compose_scene(scenario, snapshot, config.variant, config.tx_sites,
                              config.rx_spec, templates=templates)
        faces = total_face_count(scene)
        link_ids = [(t, r) for t, _ in scene.tx_positions for r, _ in scene.rx_positions]
        started = time.perf_counter()
        if link_ids:
            index = build_index(scene)
            if config.worker_count > 1:
                with ThreadPoolExecutor(max_workers=config.worker_count) as pool:
                    results = list(pool.map(
                        lambda ids: trace_channel(scene, ids[0], ids[1], config.rt, index),
                        link_ids,
                    ))
            else:
                results = [trace_channel(scene, t, r, config.rt, index) for t, r in link_ids]
        else:
            results = []
        runtime = time.perf_counter() - started
        if not results:
            log.warning("scene %d at t=%.3f resolved no receivers; empty record", scene_index, snapshot.time)
        else:
            any_links = True
        records.append(SceneRecord(
            scene_index=scene_index,
            time=snapshot.time,
            actors=[ActorRecord(a.actor_id, a.kind, a.position.x, a.position.y, a.heading, a.speed)
                    for a in snapshot.actors],
            total_face_count=faces,
            links=[_link_record(r) for r in results],
            runtime_s=runtime,
        ))
    if not any_links:
        raise ConfigError("no scene resolved any receivers; check rx_spec against the trace")

    runtimes = [r.runtime_s for r in records]
    totals = EpisodeTotals(
        scene_count=len(records),
        total_runtime_s=sum(runtimes),
        runtime_mean_s=statistics.fmean(runtimes),
        runtime_std_s=statistics.pstdev(runtimes),
    )
    result = EpisodeResult(config=_config_echo(config), records=records, totals=totals)
    if config.output:
        serialize_episode(result, config.output)
        write_summary_csv(result, _summary_path(config.output))
    return result


# --- serialization -----------------------------------------------------------


def _summary_path(output: str) -> str:
    base = output[:-6] if output.endswith(".jsonl") else output
    return base + ".summary.csv"


def serialize_episode(result: EpisodeResult, sink) -> None:
    """Write the dataset as line-delimited JSON (header line + one line per scene)."""
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": result.config,
        "totals": asdict(result.totals),
    }
    own = not hasattr(sink, "write")
    fh = open(sink, "w", encoding="utf-8", newline="\n") if own else sink
    try:
        fh.write(json.dumps(header) + "\n")
        for record in result.records:
            fh.write(json.dumps(asdict(record)) + "\n")
    finally:
        if own:
            fh.close()


def load_episode(source) -> EpisodeResult:
    """Parse a dataset written by :func:`serialize_episode`.

    Raises VersionMismatchError on a format version bump and
    EpisodeFormatError with the byte offset for truncated or corrupt
    files.
    """
    own = not hasattr(source, "read")
    fh = open(source, "r", encoding="utf-8", newline="") if own else source
    try:
        text = fh.read()
    finally:
        if own:
            fh.close()
    if not text.strip():
        raise EpisodeFormatError("file is empty", byte_offset=0)
    offset = 0
    lines = text.splitlines(keepends=True)
    parsed: list[dict] = []
    for line in lines:
        stripped = line.strip()
        if stripped:
            try:
                parsed.append(json.loads(stripped))
            except json.JSONDecodeError as exc:
                raise EpisodeFormatError(
                    f"invalid record: {exc.msg}", byte_offset=offset + exc.pos
                ) from None
        offset += len(line.encode("utf-8"))
    header = parsed[0]
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise EpisodeFormatError("not a mobiray episode file", byte_offset=0)
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(found=version, expected=FORMAT_VERSION)
    totals = EpisodeTotals(**header["totals"])
    if totals.scene_count != len(parsed) - 1:
        raise EpisodeFormatError(
            f"header promises {totals.scene_count} scenes but file holds {len(parsed) - 1}",
            byte_offset=offset,
        )
    records = []
    for entry in parsed[1:]:
        links = [
            LinkRecord(
                tx_id=lk["tx_id"],
                rx_id=lk["rx_id"],
                los_blocked=lk["los_blocked"],
                total_power_noncoherent_db=lk["total_power_noncoherent_db"],
                total_power_coherent_db=lk["total_power_coherent_db"],
                paths=[PathRecord(**p) for p in lk["paths"]],
            )
            for lk in entry["links"]
        ]
        records.append(SceneRecord(
            scene_index=entry["scene_index"],
            time=entry["time"],
            actors=[ActorRecord(**a) for a in entry["actors"]],
            total_face_count=entry["total_face_count"],
            links=links,
            runtime_s=entry["runtime_s"],
        ))
    return EpisodeResult(config=header["config"], records=records, totals=totals)


def write_summary_csv(result: EpisodeResult, sink) -> None:
    """Per-scene summary: scene_index,time,total_face_count,n_links,n_paths_total,runtime_s."""
    own = not hasattr(sink, "write")
    fh = open(sink, "w", encoding="utf-8", newline="\n") if own else sink
    try:
        fh.write("scene_index,time,total_face_count,n_links,n_paths_total,runtime_s\n")
        for r in result.records:
            n_paths = sum(len(link.paths) for link in r.links)
            fh.write(f"{r.scene_index},{r.time!r},{r.total_face_count},{len(r.links)},"
                     f"{n_paths},{r.runtime_s!r}\n")
    finally:
        if own:
            fh.close()


# --- config file parsing -----------------------------------------------------

_EPISODE_KEYS = {"scenario", "trace", "snapshot_stride", "variant", "transmitters",
                 "receivers", "rt", "worker_count", "output"}
_TRACE_KEYS = {"flows", "file"}
_FLOWS_KEYS = {"specs", "t_end", "dt", "seed"}
_FLOW_SPEC_KEYS = {"route", "kind", "target_speed", "acceleration", "insertion_period",
                   "count", "start_time"}
_SITE_KEYS = {"id", "position"}
_RX_KEYS = {"fixed", "mobile"}
_MOBILE_KEYS = {"kinds", "height_offset"}
_RT_KEYS = {"frequency", "max_reflection_order", "max_paths"}


def _check_keys(mapping, allowed: set, where: str) -> None:
    if not isinstance(mapping, dict):
        raise SchemaError(f"{where} must be a mapping, got {type(mapping).__name__}")
    for key in mapping:
        if key not in allowed:
            raise SchemaError(f"unknown key {key!r} in {where}")


def parse_flow_specs(entries, where: str = "flows") -> list[FlowSpec]:
    specs = []
    for i, entry in enumerate(entries or []):
        _check_keys(entry, _FLOW_SPEC_KEYS, f"{where}[{i}]")
        for req in ("route", "kind", "target_speed", "acceleration", "insertion_period", "count"):
            if req not in entry:
                raise SchemaError(f"{where}[{i}] is missing {req!r}")
        specs.append(FlowSpec(
            route=[str(r) for r in entry["route"]],
            kind=str(entry["kind"]),
            target_speed=float(entry["target_speed"]),
            acceleration=float(entry["acceleration"]),
            insertion_period=float(entry["insertion_period"]),
            count=int(entry["count"]),
            start_time=float(entry.get("start_time", 0.0)),
        ))
    return specs


def _parse_sites(entries, where: str) -> list[tuple[str, Vec3]]:
    sites = []
    for i, entry in enumerate(entries or []):
        _check_keys(entry, _SITE_KEYS, f"{where}[{i}]")
        if "id" not in entry or "position" not in entry:
            raise SchemaError(f"{where}[{i}] needs 'id' and 'position'")
        pos = entry["position"]
        if not isinstance(pos, (list, tuple)) or len(pos) != 3:
            raise SchemaError(f"{where}[{i}]: position must be [x, y, z]")
        sites.append((str(entry["id"]), Vec3(float(pos[0]), float(pos[1]), float(pos[2]))))
    return sites


def parse_rx_spec(data) -> FixedReceivers | MobileReceivers:
    _check_keys(data, _RX_KEYS, "receivers")
    if ("fixed" in data) == ("mobile" in data):
        raise SchemaError("receivers needs exactly one of 'fixed' or 'mobile'")
    if "fixed" in data:
        return FixedReceivers(_parse_sites(data["fixed"], "receivers.fixed"))
    _check_keys(data["mobile"], _MOBILE_KEYS, "receivers.mobile")
    mob = data["mobile"]
    if "kinds" not in mob or "height_offset" not in mob:
        raise SchemaError("receivers.mobile needs 'kinds' and 'height_offset'")
    return MobileReceivers(kinds=[str(k) for k in mob["kinds"]],
                           height_offset=float(mob["height_offset"]))


def parse_rt_config(data) -> RTConfig:
    _check_keys(data or {}, _RT_KEYS, "rt")
    data = data or {}
    kwargs = {}
    if "frequency" in data:
        kwargs["frequency"] = float(data["frequency"])
    if "max_reflection_order" in data:
        kwargs["max_reflection_order"] = int(data["max_reflection_order"])
    if "max_paths" in data:
        kwargs["max_paths"] = int(data["max_paths"])
    return RTConfig(**kwargs)


def parse_episode_config(data: dict) -> EpisodeConfig:
    """Build an EpisodeConfig from parsed YAML data (strict keys)."""
    _check_keys(data, _EPISODE_KEYS, "episode config")
    for req in ("scenario", "trace", "transmitters", "receivers"):
        if req not in data:
            raise SchemaError(f"episode config is missing {req!r}")
    _check_keys(data["trace"], _TRACE_KEYS, "trace")
    if ("flows" in data["trace"]) == ("file" in data["trace"]):
        raise SchemaError("trace needs exactly one of 'flows' or 'file'")
    if "flows" in data["trace"]:
        flows_data = data["trace"]["flows"]
        _check_keys(flows_data, _FLOWS_KEYS, "trace.flows")
        for req in ("specs", "t_end", "dt"):
            if req not in flows_data:
                raise SchemaError(f"trace.flows is missing {req!r}")
        trace = FlowTraceSpec(
            flows=parse_flow_specs(flows_data["specs"], "trace.flows.specs"),
            t_end=float(flows_data["t_end"]),
            dt=float(flows_data["dt"]),
            seed=int(flows_data.get("seed", 0)),
        )
    else:
        trace = FileTraceSpec(path=str(data["trace"]["file"]))
    try:
        rt_config = parse_rt_config(data.get("rt"))
    except ValueError as exc:
        raise SchemaError(f"rt: {exc}") from None
    return EpisodeConfig(
        scenario=str(data["scenario"]),
        trace=trace,
        tx_sites=_parse_sites(data["transmitters"], "transmitters"),
        rx_spec=parse_rx_spec(data["receivers"]),
        variant=str(data.get("variant", "cube")),
        snapshot_stride=int(data.get("snapshot_stride", 1)),
        rt=rt_config,
        worker_count=int(data.get("worker_count", 1)),
        output=str(data["output"]) if data.get("output") else None,
    )
