"""splatbus command line: demo server, headless client tools, web gateway.

Exit codes for ``server``: 0 clean shutdown, 2 bad configuration, 3 asset
load failure.  SPLATBUS_LOG sets the log level (debug/info/warning/error).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import statistics
import sys
import time

log = logging.getLogger("splatbus.cli")


def _setup_logging() -> None:
    level = os.environ.get("SPLATBUS_LOG", "info").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def _add_connect_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--init-port", type=int, default=7420)
    p.add_argument("--msg-port", type=int, default=7421)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatbus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    server = sub.add_parser("server", help="run the demo render server")
    server.add_argument("--width", type=int, default=512)
    server.add_argument("--height", type=int, default=512)
    server.add_argument("--init-port", type=int, default=7420)
    server.add_argument("--msg-port", type=int, default=7421)
    server.add_argument("--ply", default=None, help="splat PLY asset (default: built-in scene)")
    server.add_argument("--transport", choices=["shared_memory", "inprocess"], default="shared_memory")
    server.add_argument("--fov", type=float, default=60.0, help="default vertical fov, degrees")
    server.add_argument("--host", default="127.0.0.1")
    server.add_argument("--max-fps", type=float, default=60.0)
    server.add_argument("--max-clients", type=int, default=8)
    server.add_argument("--checksum", action="store_true", help="stamp per-frame checksums (test builds)")

    grab = sub.add_parser("grab", help="save frames as PNG/PPM plus PGM16 depth")
    _add_connect_flags(grab)
    grab.add_argument("--count", type=int, default=1)
    grab.add_argument("--out", default=".", help="output directory")
    grab.add_argument("--format", choices=["png", "ppm"], default="png")
    grab.add_argument("--depth-vis-max", type=float, default=100.0)
    grab.add_argument("--timeout", type=float, default=10.0)

    pose = sub.add_parser("pose", help="send camera/object poses")
    _add_connect_flags(pose)
    pose.add_argument("--pos", type=float, nargs=3, default=[0.0, 0.0, 0.0])
    pose.add_argument("--quat", type=float, nargs=4, default=[0.0, 0.0, 0.0, 1.0], metavar=("X", "Y", "Z", "W"))
    pose.add_argument("--fov", type=float, default=None, help="vertical fov, degrees")
    pose.add_argument("--convention", choices=["unity_lh_yup", "gs_rh_ydown"], default="unity_lh_yup")
    pose.add_argument("--object", default=None, help="send an object pose for this id instead of the camera")
    pose.add_argument("--scale", type=float, default=1.0)
    pose.add_argument("--script", default=None, help="JSONL file: one control message per line")
    pose.add_argument("--rate", type=float, default=60.0, help="script replay rate, messages/s")

    telemetry = sub.add_parser("telemetry", help="record telemetry to CSV")
    _add_connect_flags(telemetry)
    telemetry.add_argument("--duration", type=float, default=10.0)
    telemetry.add_argument("--out", default="telemetry.csv")

    bench = sub.add_parser("bench", help="measure publish-to-snapshot latency")
    _add_connect_flags(bench)
    bench.add_argument("--frames", type=int, default=300)
    bench.add_argument("--warmup", type=int, default=30)

    gateway = sub.add_parser("gateway", help="run the browser gateway")
    gateway.add_argument("--port", type=int, default=7422)
    gateway.add_argument("--server-host", default="127.0.0.1")
    gateway.add_argument("--init-port", type=int, default=7420)
    gateway.add_argument("--msg-port", type=int, default=7421)
    gateway.add_argument("--fps-cap", type=float, default=30.0)
    gateway.add_argument("--encoding", choices=["rgba8_raw", "png"], default="rgba8_raw")
    gateway.add_argument("--depth-preview", action="store_true")
    gateway.add_argument("--static-dir", default=None, help="serve the browser viewer from this directory")
    gateway.add_argument("--bind", default="0.0.0.0")

    return parser


def cmd_server(args) -> int:
    from splatbus.server import ServerConfig, run_demo
    from splatbus.splatref.cloud import PlyParseError, UnsupportedAssetError

    try:
        config = ServerConfig(
            width=args.width,
            height=args.height,
            init_port=args.init_port,
            message_port=args.msg_port,
            transport=args.transport,
            default_fov_y=math.radians(args.fov),
            max_clients=args.max_clients,
            asset_path=args.ply,
            host=args.host,
            stamp_checksums=args.checksum,
            target_fps=args.max_fps,
        )
        config.validate()
    except ValueError as exc:
        log.error("bad configuration: %s", exc)
        return 2
    try:
        run_demo(config)
    except (FileNotFoundError, PlyParseError, UnsupportedAssetError) as exc:
        log.error("asset error: %s", exc)
        return 3
    except OSError as exc:
        log.error("startup failed: %s", exc)
        return 2
    return 0


def cmd_grab(args) -> int:
    import numpy as np

    from splatbus.client import connect
    from splatbus.colorspace import tonemap_to_rgba8
    from splatbus.splatref import image_io

    os.makedirs(args.out, exist_ok=True)
    session = connect(args.host, args.init_port, args.msg_port, client_name="splatbus-grab")
    try:
        for i in range(args.count):
            snap = session.grab_frame("block_until_new", timeout=args.timeout)
            rgba8 = tonemap_to_rgba8(snap.color)
            stem = os.path.join(args.out, f"frame_{snap.frame_index:06d}")
            if args.format == "png":
                image_io.write_png(stem + ".png", rgba8)
            else:
                image_io.write_ppm(stem + ".ppm", rgba8[:, :, :3])
            image_io.write_pgm16(stem + "_depth.pgm", snap.depth, vis_max=args.depth_vis_max)
            alpha_pixels = int(np.count_nonzero(snap.color[:, :, 3]))
            print(f"frame {snap.frame_index}: saved {stem}.* ({alpha_pixels} covered pixels)")
    finally:
        session.close()
    return 0


def cmd_pose(args) -> int:
    from splatbus import wire
    from splatbus.client import connect

    session = connect(args.host, args.init_port, args.msg_port, client_name="splatbus-pose")
    try:
        if args.script:
            interval = 1.0 / args.rate if args.rate > 0 else 0.0
            sent = 0
            with open(args.script) as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    wire.parse_message(line)  # validate before replay
                    session.send_raw(line.encode("utf-8"))
                    sent += 1
                    if interval:
                        time.sleep(interval)
            print(f"replayed {sent} messages from {args.script}")
        elif args.object:
            session.send_object(args.object, args.pos, args.quat, scale=args.scale, convention=args.convention)
            print(f"sent object pose for '{args.object}'")
        else:
            session.send_camera(args.pos, args.quat, convention=args.convention, fov_y_deg=args.fov)
            print("sent camera pose")
    finally:
        session.close()
    return 0


def cmd_telemetry(args) -> int:
    from splatbus.client import connect

    session = connect(args.host, args.init_port, args.msg_port, client_name="splatbus-telemetry")
    try:
        rows = session.record_telemetry(args.out, duration=args.duration)
        print(f"wrote {rows} rows to {args.out}")
    finally:
        session.close()
    return 0


def cmd_bench(args) -> int:
    from splatbus.client import connect

    session = connect(args.host, args.init_port, args.msg_port, client_name="splatbus-bench")
    try:
        for _ in range(args.warmup):
            session.grab_frame("block_until_new", timeout=10.0)
        latencies_ms = []
        for _ in range(args.frames):
            snap = session.grab_frame("block_until_new", timeout=10.0)
            latencies_ms.append((time.monotonic_ns() - snap.timestamp_ns) / 1e6)
        latencies_ms.sort()
        median = statistics.median(latencies_ms)
        p90 = latencies_ms[int(0.9 * len(latencies_ms))]
        width, height = session.init.width, session.init.height
        print(
            f"publish->snapshot latency over {args.frames} frames at {width}x{height} "
            f"({session.init.transport}): median {median:.3f} ms, p90 {p90:.3f} ms, "
            f"min {latencies_ms[0]:.3f} ms, max {latencies_ms[-1]:.3f} ms"
        )
        print(json.dumps({"median_ms": median, "p90_ms": p90, "frames": args.frames}))
    finally:
        session.close()
    return 0


def cmd_gateway(args) -> int:
    from splatbus.gateway import GatewayConfig, serve_web

    config = GatewayConfig(
        listen_port=args.port,
        server_host=args.server_host,
        init_port=args.init_port,
        message_port=args.msg_port,
        target_fps_cap=args.fps_cap,
        encoding=args.encoding,
        depth_preview=args.depth_preview,
        static_dir=args.static_dir,
    )
    serve_web(config, host=args.bind)
    return 0


_COMMANDS = {
    "server": cmd_server,
    "grab": cmd_grab,
    "pose": cmd_pose,
    "telemetry": cmd_telemetry,
    "bench": cmd_bench,
    "gateway": cmd_gateway,
}


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except KeyboardInterrupt:
        return 0
    except ConnectionError as exc:
        log.error("connection failed: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
