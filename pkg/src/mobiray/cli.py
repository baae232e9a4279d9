"""Command-line entry point.

One binary with subcommands; structured inputs come from YAML config
files, scalars from flags. Exit codes: 0 success, 1 validation or config
error, 2 runtime error. Diagnostics go to stderr; data goes to files or
stdout, never mixed with diagnostics on one stream.
"""

import argparse
import sys
import traceback

import yaml

from .bench import (
    BenchMatrixConfig,
    format_table,
    hard_ordering_violations,
    run_matrix,
    standard_matrix_config,
    write_report,
)
from .errors import (
    ConfigError,
    EpisodeFormatError,
    GeometryError,
    SchemaError,
    TraceFormatError,
)
from .mobility import simulate_flows, write_trace
from .orchestrator import (
    load_episode,
    parse_episode_config,
    parse_flow_specs,
    parse_rt_config,
    parse_rx_spec,
    run_episode,
)
from .scenario import FixedReceivers, load_scenario


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; this tool reserves 2 for runtime errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _load_yaml(path: str, what: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh.read())
    if not isinstance(data, dict):
        raise SchemaError(f"{what} must contain a top-level mapping")
    return data


def cmd_scenario_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    total = scenario.ground.face_count
    for i, mesh in enumerate(scenario.buildings):
        mats = sorted(set(mesh.materials))
        print(f"building {i}: faces {mesh.face_count} (material {', '.join(mats)})")
        total += mesh.face_count
    print(f"ground: faces {scenario.ground.face_count} (material {scenario.ground_material})")
    print(f"roads: {len(scenario.roads.roads)}")
    print(f"materials: {len(scenario.materials)}")
    print(f"total static faces: {total}")
    return 0


def cmd_flows(args) -> int:
    scenario = load_scenario(args.scenario)
    data = _load_yaml(args.flows_config, "flows config")
    for key in data:
        if key != "flows":
            raise SchemaError(f"unknown key {key!r} in flows config")
    if "flows" not in data:
        raise SchemaError("flows config is missing 'flows'")
    flows = parse_flow_specs(data["flows"], "flows")
    trace = simulate_flows(scenario.roads, flows, args.t_end, args.dt, args.seed)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        write_trace(trace, fh)
    print(f"wrote {sum(len(s.actors) for s in trace.snapshots)} rows "
          f"({len(trace.snapshots)} snapshots) to {args.out}")
    return 0


def cmd_episode(args) -> int:
    config = parse_episode_config(_load_yaml(args.config, "episode config"))
    if not config.output:
        raise ConfigError("episode config must set 'output' when run from the CLI")
    result = run_episode(config)
    print(f"scenes: {result.totals.scene_count}")
    print(f"total runtime: {result.totals.total_runtime_s:.6f} s "
          f"(mean {result.totals.runtime_mean_s:.6f} s per scene)")
    print(f"dataset: {config.output}")
    return 0


def _parse_bench_config(data: dict) -> BenchMatrixConfig:
    allowed = {"scenario", "trace", "transmitters", "rt", "snapshot_stride",
               "worker_count", "repetitions", "fixed_receivers", "mobile_receivers"}
    for key in data:
        if key not in allowed:
            raise SchemaError(f"unknown key {key!r} in bench config")
    for req in ("scenario", "trace", "transmitters", "fixed_receivers", "mobile_receivers"):
        if req not in data:
            raise SchemaError(f"bench config is missing {req!r}")
    episode_data = {
        "scenario": data["scenario"],
        "trace": data["trace"],
        "transmitters": data["transmitters"],
        "receivers": {"fixed": data["fixed_receivers"]},
    }
    for opt in ("rt", "snapshot_stride", "worker_count"):
        if opt in data:
            episode_data[opt] = data[opt]
    base = parse_episode_config(episode_data)
    fixed = base.rx_spec
    assert isinstance(fixed, FixedReceivers)
    mobile = parse_rx_spec({"mobile": data["mobile_receivers"]})
    return BenchMatrixConfig(base=base, fixed_rx=fixed, mobile_rx=mobile,
                             repetitions=int(data.get("repetitions", 5)))


def cmd_bench(args) -> int:
    if args.config:
        config = _parse_bench_config(_load_yaml(args.config, "bench config"))
    else:
        config = standard_matrix_config()
    if args.repetitions:
        config = BenchMatrixConfig(base=config.base, fixed_rx=config.fixed_rx,
                                   mobile_rx=config.mobile_rx, repetitions=args.repetitions)
    report = run_matrix(config)
    table = write_report(report, args.out_dir)
    print(table)
    for message in report.messages:
        print(f"warning: {message}", file=sys.stderr)
    if args.assert_ordering:
        problems = hard_ordering_violations(report)
        if problems:
            for problem in problems:
                print(f"assertion failed: {problem}", file=sys.stderr)
            return 1
    return 0


def cmd_inspect(args) -> int:
    result = load_episode(args.episode)
    if not 0 <= args.scene < len(result.records):
        raise ConfigError(
            f"scene {args.scene} out of range; file holds {len(result.records)} scenes"
        )
    record = result.records[args.scene]
    print(f"scene {record.scene_index} at t={record.time} s, "
          f"{record.total_face_count} faces, runtime {record.runtime_s:.6f} s")
    if record.actors:
        print("actors:")
        for a in record.actors:
            print(f"  {a.actor_id:<16} {a.kind:<10} x={a.x:9.2f} y={a.y:9.2f} "
                  f"heading={a.heading:6.3f} speed={a.speed:5.2f}")
    else:
        print("actors: none")
    for link in record.links:
        state = "NLOS" if link.los_blocked else "LOS"
        print(f"link {link.tx_id} -> {link.rx_id} [{state}] "
              f"power {link.total_power_noncoherent_db:.2f} dB, {len(link.paths)} paths")
        for p in link.paths:
            print(f"    len {p.length:9.3f} m  delay {p.delay * 1e9:9.3f} ns  "
                  f"gain {p.gain_db:8.2f} dB  refl {p.reflection_count}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mobiray",
                     description="Mobility-aware mmWave ray-tracing channel simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario-validate", help="parse a scenario file and print face counts")
    p.add_argument("scenario", help="scenario YAML path")
    p.set_defaults(func=cmd_scenario_validate)

    p = sub.add_parser("flows", help="simulate traffic flows and write a trace CSV")
    p.add_argument("scenario", help="scenario YAML path (provides the road network)")
    p.add_argument("flows_config", help="flows YAML path (top-level 'flows' list)")
    p.add_argument("--t-end", type=float, default=20.0, help="simulation end time, s")
    p.add_argument("--dt", type=float, default=1.0, help="snapshot period, s")
    p.add_argument("--seed", type=int, default=0, help="simulation seed")
    p.add_argument("--out", required=True, help="output trace CSV path")
    p.set_defaults(func=cmd_flows)

    p = sub.add_parser("episode", help="run an episode and write the dataset")
    p.add_argument("--config", required=True, help="episode config YAML path")
    p.set_defaults(func=cmd_episode)

    p = sub.add_parser("bench", help="run the {detailed,cube} x {fixed,mobile} benchmark matrix")
    p.add_argument("--config", help="bench config YAML path (defaults to the built-in benchmark)")
    p.add_argument("--repetitions", type=int, help="repetitions per cell")
    p.add_argument("--out-dir", default="bench_out", help="directory for per-cell CSVs and table")
    p.add_argument("--assert", dest="assert_ordering", action="store_true",
                   help="exit 1 when the runtime orderings are violated")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="print a digest of one scene of an episode file")
    p.add_argument("episode", help="episode dataset path (JSON lines)")
    p.add_argument("--scene", type=int, default=0, help="scene index to show")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EpisodeFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, GeometryError, ConfigError, TraceFormatError,
            FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
