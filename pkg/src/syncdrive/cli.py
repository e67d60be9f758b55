"""Command-line entry point: ``syncdrive run | sweep | latency-probe``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .latency import LatencySample, LatencySink
from .sim import export_metrics, export_trace, output_paths, run_scenario
from .v2x import CamMessage, cam_topic, decode_cam, encode_cam
from .v2x.transport import MqttTransport, Transport, TransportError, wall_ms

OUTPUT_ENV = "SYNCDRIVE_OUTPUT_DIR"
log = logging.getLogger("syncdrive")


def _resolve(args) -> RunConfig:
    rc = cfgmod.load(args.config)
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    rc = cfgmod.apply_overrides(rc, overrides)
    out = args.out or os.environ.get(OUTPUT_ENV) or rc.output_dir
    return dataclasses.replace(rc, output_dir=out)


def _fmt_num(x: float, unit: str) -> str:
    return "n/a" if math.isnan(x) else f"{x:.4f} {unit}"


def execute(rc: RunConfig) -> dict:
    """Run one scenario and write its trace, events, metrics and effective config."""
    trace, metrics = run_scenario(rc.scenario)
    paths = output_paths(rc.output_dir, rc.run_name, rc.scenario.seed)
    export_trace(trace, paths["trace"], paths["events"])
    export_metrics(metrics, paths["metrics"])
    cfg_path = paths["trace"].with_name(paths["trace"].name.replace("_trace.csv", "_config.toml"))
    cfg_path.write_text(cfgmod.dumps(rc))
    return {"metrics": metrics, "paths": paths}


def cmd_run(args) -> int:
    rc = _resolve(args)
    result = execute(rc)
    m = result["metrics"]
    print(
        f"{rc.run_name}: rms={_fmt_num(m.rms_speed_error_mps, 'm/s')} "
        f"max={_fmt_num(m.max_speed_error_mps, 'm/s')} "
        f"mean_latency={_fmt_num(m.mean_latency_ms, 'ms')} "
        f"final_mode={m.final_mode} -> {result['paths']['trace'].parent}"
    )
    return 0


def _sweep_point(rc: RunConfig) -> dict:
    return execute(rc)["metrics"].as_row()


def cmd_sweep(args) -> int:
    base = _resolve(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values must list at least one value")
    tag = args.param.replace(".", "-")
    points = []
    for raw in values:
        rc = cfgmod.apply_overrides(base, [f"{args.param}={raw}"])
        # same seed at every point so only the swept parameter differs
        points.append(dataclasses.replace(rc, run_name=f"{base.run_name}_{tag}_{raw}"))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, points))
    else:
        rows = [_sweep_point(rc) for rc in points]

    out = Path(base.output_dir) / f"{base.run_name}_sweep_{tag}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["param", "value", *rows[0]], lineterminator="\n")
        writer.writeheader()
        for raw, row in zip(values, rows):
            writer.writerow({"param": args.param, "value": raw, **row})
            print(
                f"{args.param}={raw}: rms={_fmt_num(row['rms_speed_error_mps'], 'm/s')} "
                f"max={_fmt_num(row['max_speed_error_mps'], 'm/s')} final_mode={row['final_mode']}"
            )
    print(f"sweep written to {out}")
    return 0


def latency_probe(
    transport: Transport,
    station_id: int,
    count: int,
    rate_hz: float,
    timeout_s: float = 2.0,
    clock: Callable[[], float] = wall_ms,
    sleep: Callable[[float], None] = time.sleep,
) -> LatencySink:
    """Publish ``count`` CAMs and time their return on the same host.

    Sender and receiver share one clock here, so the figure is the
    publish -> broker -> subscribe loop time, not a one-way latency between
    two vehicles with independent clocks.
    """
    topic = cam_topic(station_id)
    sink = LatencySink()
    transport.subscribe(topic)

    def collect() -> int:
        n = 0
        for rx in transport.poll():
            try:
                cam = decode_cam(rx.payload)
            except ValueError:
                continue
            if cam.station_id != station_id:
                continue
            sink.record(LatencySample(cam.generation_time_ms, rx.recv_time_ms, rx.topic))
            n += 1
        return n

    period = 1.0 / rate_hz
    for _ in range(count):
        # floor: the CAM stamp has 1 ms resolution and must not postdate receipt
        msg = CamMessage(station_id=station_id, generation_time_ms=math.floor(clock()))
        transport.publish(topic, encode_cam(msg))
        collect()
        sleep(period)

    deadline = time.monotonic() + timeout_s
    while len(sink) + sink.clock_anomalies < count and time.monotonic() < deadline:
        collect()
        sleep(0.01)
    collect()
    return sink


def cmd_latency_probe(args, transport_factory: Callable[[str], Transport] = MqttTransport) -> int:
    try:
        transport = transport_factory(args.broker)
    except (TransportError, OSError) as exc:
        print(f"error: broker {args.broker}: {exc}", file=sys.stderr)
        return 3
    try:
        sink = latency_probe(transport, args.id, args.count, args.rate, args.timeout)
    finally:
        transport.close()
    if not len(sink):
        print(f"error: no CAMs came back from {args.broker}", file=sys.stderr)
        return 4
    s = sink.stats()
    print(
        f"received {s.count}/{args.count} (same-host loop latency): mean={s.mean_ms:.2f} ms "
        f"min={s.min_ms:.2f} p50={s.p50_ms:.2f} p95={s.p95_ms:.2f} max={s.max_ms:.2f} ms"
    )
    return 0


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="syncdrive", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", help="TOML run configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
        p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or config output_dir)")
        p.add_argument("--seed", type=int)

    p_run = sub.add_parser("run", help="run one scenario")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run one scenario per parameter value")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True, help="dotted config key, e.g. network.loss_prob")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--jobs", type=_positive_int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_probe = sub.add_parser("latency-probe", help="measure CAM loop latency through a real MQTT broker")
    p_probe.add_argument("--broker", required=True, help="mqtt://host:port")
    p_probe.add_argument("--id", type=int, default=1, help="station id")
    p_probe.add_argument("--count", type=_positive_int, default=100)
    p_probe.add_argument("--rate", type=_positive_float, default=10.0, help="publish rate, Hz")
    p_probe.add_argument("--timeout", type=float, default=2.0, help="wait after the last publish, s")
    p_probe.set_defaults(func=cmd_latency_probe)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
