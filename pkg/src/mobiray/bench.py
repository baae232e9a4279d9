"""Realism-vs-runtime benchmark: {detailed, cube} x {fixed, mobile} matrix.

Each cell runs the same episode (identical scenario and mobility trace)
and differs only in the object-template variant and the receiver
configuration. Per-scene runtimes are taken as the median over
repetitions to resist scheduler noise; cells run strictly sequentially
with ``worker_count`` pinned (default 1) so the timings stay comparable.

The expected ordering on this benchmark: detailed templates cost at least
as much as cube templates within a receiver configuration, and mobile
receivers cost at least as much as fixed ones within a variant. Whether
the detailed-versus-cube gap widens under mobile receivers is reported as
a soft check only, since it is hardware sensitive.
"""

from dataclasses import dataclass, replace
import logging
import math
import os
import statistics
import time

from .errors import ConfigError
from .geometry import Vec3, template_index
from .mobility import ActorState, FlowSpec, Snapshot, Trace
from .orchestrator import EpisodeConfig, FlowTraceSpec, run_episode
from .rt import RTConfig, build_index, trace_channel
from .scenario import (
    FixedReceivers,
    MobileReceivers,
    Scenario,
    compose_scene,
    parse_scenario,
    total_face_count,
)

log = logging.getLogger(__name__)

CELL_ORDER = ("fixed_detailed", "fixed_cube", "mobile_detailed", "mobile_cube")


def summarize(series) -> tuple[float, float, float, float]:
    """(mean, population std, min, max) of a non-empty series."""
    values = list(series)
    if not values:
        raise ValueError("cannot summarize an empty series")
    return (statistics.fmean(values), statistics.pstdev(values),
            min(values), max(values))


@dataclass(frozen=True)
class BenchMatrixConfig:
    """The 2x2 benchmark: one episode template plus the two receiver setups."""

    base: EpisodeConfig
    fixed_rx: FixedReceivers
    mobile_rx: MobileReceivers
    repetitions: int = 5

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")


@dataclass(frozen=True)
class CellResult:
    """Per-cell series and summary statistics."""

    cell: str
    variant: str
    rx_mode: str
    runtime_median_s: list[float]
    face_counts: list[int]
    link_counts: list[int]
    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True)
class BenchReport:
    cells: dict[str, CellResult]
    repetitions: int
    worker_count: int
    scene_count: int
    soft_check_passed: bool | None = None
    messages: tuple = ()


def _materialize_trace(config: EpisodeConfig, scenario: Scenario) -> Trace:
    if isinstance(config.trace, Trace):
        return config.trace
    if isinstance(config.trace, FlowTraceSpec):
        from .mobility import simulate_flows

        return simulate_flows(scenario.roads, config.trace.flows, config.trace.t_end,
                              config.trace.dt, config.trace.seed)
    from .mobility import parse_trace

    with open(config.trace.path, "r", encoding="utf-8", newline="") as fh:
        return parse_trace(fh)


def run_matrix(config: BenchMatrixConfig) -> BenchReport:
    """Run all four cells over the same trace and collect the report."""
    from .scenario import load_scenario

    scenario = (config.base.scenario if isinstance(config.base.scenario, Scenario)
                else load_scenario(config.base.scenario))
    trace = _materialize_trace(config.base, scenario)

    cells: dict[str, CellResult] = {}
    for cell in CELL_ORDER:
        rx_mode, variant = cell.split("_")
        rx_spec = config.fixed_rx if rx_mode == "fixed" else config.mobile_rx
        per_rep: list[list[float]] = []
        face_counts: list[int] = []
        link_counts: list[int] = []
        episode = replace(config.base, scenario=scenario, trace=trace,
                          variant=variant, rx_spec=rx_spec, output=None)
        for rep in range(config.repetitions):
            try:
                result = run_episode(episode)
            except Exception as exc:
                raise type(exc)(f"benchmark cell {cell!r}: {exc}") from exc
            per_rep.append([r.runtime_s for r in result.records])
            if rep == 0:
                face_counts = [r.total_face_count for r in result.records]
                link_counts = [len(r.links) for r in result.records]
        medians = [statistics.median(scene_times) for scene_times in zip(*per_rep)]
        mean, std, lo, hi = summarize(medians)
        cells[cell] = CellResult(cell, variant, rx_mode, medians, face_counts,
                                 link_counts, mean, std, lo, hi)

    lengths = {len(c.runtime_median_s) for c in cells.values()}
    if len(lengths) != 1:
        raise ConfigError(f"cells produced unequal series lengths: {sorted(lengths)}")
    soft, messages = _ordering_checks(cells)
    return BenchReport(cells=cells, repetitions=config.repetitions,
                       worker_count=config.base.worker_count,
                       scene_count=lengths.pop(), soft_check_passed=soft,
                       messages=tuple(messages))


def _ordering_checks(cells: dict[str, CellResult]) -> tuple[bool, list[str]]:
    messages = []
    gap_fixed = cells["fixed_detailed"].mean - cells["fixed_cube"].mean
    gap_mobile = cells["mobile_detailed"].mean - cells["mobile_cube"].mean
    soft = gap_mobile >= gap_fixed
    if not soft:
        messages.append(
            "soft check: detailed-cube runtime gap did not widen under mobile receivers "
            f"(fixed {gap_fixed:.6f} s vs mobile {gap_mobile:.6f} s)"
        )
    return soft, messages


def hard_ordering_violations(report: BenchReport) -> list[str]:
    """The orderings asserted by the acceptance suite: detailed >= cube per
    receiver mode, mobile >= fixed per variant."""
    c = report.cells
    problems = []
    for rx_mode in ("fixed", "mobile"):
        if c[f"{rx_mode}_detailed"].mean < c[f"{rx_mode}_cube"].mean:
            problems.append(
                f"mean runtime detailed < cube for {rx_mode} receivers "
                f"({c[rx_mode + '_detailed'].mean:.6f} < {c[rx_mode + '_cube'].mean:.6f})"
            )
    for variant in ("detailed", "cube"):
        if c[f"mobile_{variant}"].mean < c[f"fixed_{variant}"].mean:
            problems.append(
                f"mean runtime mobile < fixed for {variant} templates "
                f"({c['mobile_' + variant].mean:.6f} < {c['fixed_' + variant].mean:.6f})"
            )
    return problems


def write_report(report: BenchReport, out_dir: str) -> str:
    """Write per-cell CSVs plus the summary table; returns the table text."""
    os.makedirs(out_dir, exist_ok=True)
    for cell in CELL_ORDER:
        result = report.cells[cell]
        with open(os.path.join(out_dir, f"bench_{cell}.csv"), "w", encoding="utf-8") as fh:
            fh.write("cell,scene_index,face_count,runtime_s_median\n")
            for i, (faces, runtime) in enumerate(zip(result.face_counts, result.runtime_median_s)):
                fh.write(f"{cell},{i},{faces},{runtime!r}\n")
    table = format_table(report)
    with open(os.path.join(out_dir, "bench_summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    return table


def format_table(report: BenchReport) -> str:
    lines = [
        f"benchmark matrix: {report.scene_count} scenes, median of {report.repetitions} repetitions, "
        f"worker_count={report.worker_count}",
        f"{'cell':<16} {'mean_s':>10} {'std_s':>10} {'min_s':>10} {'max_s':>10} {'faces':>12}",
    ]
    for cell in CELL_ORDER:
        c = report.cells[cell]
        faces = f"{min(c.face_counts)}..{max(c.face_counts)}"
        lines.append(
            f"{cell:<16} {c.mean:>10.6f} {c.std:>10.6f} {c.min:>10.6f} {c.max:>10.6f} {faces:>12}"
        )
    for message in report.messages:
        lines.append(f"note: {message}")
    return "\n".join(lines)


# --- the standard benchmark --------------------------------------------------


def standard_scenario() -> Scenario:
    """8 convex buildings on a 200 x 200 m block with two crossing roads.

    Building heights span 10 to 24 m; the transmitter sits 1 m above the
    roof of the 24 m building ("rooftop site" at 25 m). Chosen so a full
    benchmark matrix runs in minutes on a laptop.
    """
    data = {
        "bounds": {"x_min": 0.0, "y_min": 0.0, "x_max": 200.0, "y_max": 200.0},
        "buildings": [
            {"footprint": [[15, 15], [85, 15], [85, 55], [15, 55]], "height": 24.0,
             "material": "concrete"},
            {"footprint": [[15, 62], [60, 62], [60, 88], [15, 88]], "height": 12.0,
             "material": "concrete"},
            {"footprint": [[115, 15], [185, 15], [185, 45], [115, 45]], "height": 20.0,
             "material": "concrete"},
            {"footprint": [[120, 55], [170, 55], [170, 88], [120, 88]], "height": 16.0,
             "material": "concrete"},
            {"footprint": [[15, 115], [55, 115], [55, 185], [15, 185]], "height": 18.0,
             "material": "concrete"},
            {"footprint": [[65, 115], [88, 115], [88, 170], [65, 170]], "height": 10.0,
             "material": "concrete"},
            # Hexagonal tower, exercises the non-rectangular extrusion path.
            {"footprint": [[140, 112], [168, 112], [176, 131], [168, 150], [140, 150], [132, 131]],
             "height": 22.0, "material": "concrete"},
            {"footprint": [[120, 160], [180, 160], [180, 188], [120, 188]], "height": 14.0,
             "material": "concrete"},
        ],
        "roads": [
            {"id": "ew", "polyline": [[0.0, 100.0], [200.0, 100.0]], "speed_limit": 14.0},
            {"id": "ns", "polyline": [[100.0, 0.0], [100.0, 200.0]], "speed_limit": 14.0},
            # Sidewalks parallel the roads so pedestrian flows do not queue
            # the vehicle traffic behind walking pace.
            {"id": "ew_walk", "polyline": [[0.0, 94.0], [200.0, 94.0]], "speed_limit": 1.5},
            {"id": "ns_walk", "polyline": [[94.0, 0.0], [94.0, 200.0]], "speed_limit": 1.5},
        ],
    }
    return parse_scenario(data)


def standard_flows() -> list[FlowSpec]:
    """6 cars, 2 buses, 1 truck, 4 pedestrians over the two roads.

    Car speeds keep every car on its road for the whole 20 s window, so
    the time-averaged mobile receiver count stays near the 4 fixed
    receivers and the four cells compare similar link workloads.
    """
    return [
        FlowSpec(route=["ew"], kind="car", target_speed=9.0, acceleration=2.0,
                 insertion_period=5.0, count=3, start_time=0.0),
        FlowSpec(route=["ns"], kind="car", target_speed=9.0, acceleration=2.0,
                 insertion_period=5.0, count=3, start_time=2.0),
        FlowSpec(route=["ew"], kind="bus", target_speed=8.0, acceleration=1.2,
                 insertion_period=8.0, count=2, start_time=1.0),
        FlowSpec(route=["ns"], kind="truck", target_speed=8.0, acceleration=1.0,
                 insertion_period=8.0, count=1, start_time=5.0),
        FlowSpec(route=["ew_walk"], kind="pedestrian", target_speed=1.4, acceleration=0.8,
                 insertion_period=5.0, count=2, start_time=0.0),
        FlowSpec(route=["ns_walk"], kind="pedestrian", target_speed=1.4, acceleration=0.8,
                 insertion_period=5.0, count=2, start_time=0.0),
    ]


#: Rooftop transmitter: 1 m above the 24 m building, at the roof corner
#: overlooking the central intersection.
STANDARD_TX = [("bs0", Vec3(84.0, 54.0, 25.0))]

#: Four street-corner receivers around the central intersection, 1.5 m.
STANDARD_FIXED_RX = FixedReceivers([
    ("rx_sw", Vec3(92.0, 92.0, 1.5)),
    ("rx_se", Vec3(108.0, 92.0, 1.5)),
    ("rx_nw", Vec3(92.0, 108.0, 1.5)),
    ("rx_ne", Vec3(108.0, 108.0, 1.5)),
])

STANDARD_MOBILE_RX = MobileReceivers(kinds=["car"], height_offset=1.5)


def standard_episode_config(variant: str = "cube", rx_spec=None,
                            rt: RTConfig | None = None,
                            worker_count: int = 1) -> EpisodeConfig:
    """The standard 20-snapshot episode used by the benchmark and tests."""
    return EpisodeConfig(
        scenario=standard_scenario(),
        trace=FlowTraceSpec(flows=standard_flows(), t_end=20.0, dt=1.0, seed=0),
        tx_sites=list(STANDARD_TX),
        rx_spec=rx_spec if rx_spec is not None else STANDARD_FIXED_RX,
        variant=variant,
        rt=rt if rt is not None else RTConfig(),
        worker_count=worker_count,
    )


def standard_matrix_config(repetitions: int = 5) -> BenchMatrixConfig:
    return BenchMatrixConfig(
        base=standard_episode_config(),
        fixed_rx=STANDARD_FIXED_RX,
        mobile_rx=STANDARD_MOBILE_RX,
        repetitions=repetitions,
    )


# --- controlled vehicle-count scaling ----------------------------------------


def vehicle_scaling_snapshots(counts=(0, 4, 8, 16)) -> list[Snapshot]:
    """Synthetic snapshots that differ only in cube-car count.

    Cars are parked deterministically along both roads with ample spacing;
    everything else in the scene is identical, so any runtime growth
    across the family tracks the added faces alone.
    """
    snapshots = []
    for t_idx, count in enumerate(counts):
        actors = []
        for k in range(count):
            if k % 2 == 0:
                x, y, heading = 12.0 + 11.0 * (k // 2), 100.0, 0.0
            else:
                x, y, heading = 100.0, 12.0 + 11.0 * (k // 2), math.pi / 2.0
            actors.append(ActorState(f"car{k}", "car", Vec3(x, y, 0.0), heading, 0.0))
        snapshots.append(Snapshot(time=float(t_idx), actors=actors))
    return snapshots


def time_scene_family(counts=(0, 4, 8, 16), repetitions: int = 5,
                      rt: RTConfig | None = None) -> list[tuple[int, int, float]]:
    """Median trace time per scene of the vehicle-scaling family.

    Returns one (vehicle_count, total_face_count, median_runtime_s) per
    family member, in order.
    """
    rt = rt or RTConfig()
    scenario = standard_scenario()
    templates = template_index()
    results = []
    for count, snapshot in zip(counts, vehicle_scaling_snapshots(counts)):
        scene = compose_scene(scenario, snapshot, "cube", list(STANDARD_TX),
                              STANDARD_FIXED_RX, templates=templates)
        faces = total_face_count(scene)
        times = []
        for _ in range(repetitions):
            started = time.perf_counter()
            index = build_index(scene)
            for tx_id, _ in scene.tx_positions:
                for rx_id, _ in scene.rx_positions:
                    trace_channel(scene, tx_id, rx_id, rt, index)
            times.append(time.perf_counter() - started)
        results.append((count, faces, statistics.median(times)))
    return results
