"""Command-line entry point.

    engine serve --port 7777 --task kick_the_ball --obs vision,audio
    engine gen tactile_classification --n 1000 --seed 3 --out data/tactile
    engine bench [--steps 400] [--compare-backends]

ENGINE_LOG sets the log level (DEBUG/INFO/WARNING/ERROR).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import dataset
from .errors import EngineError


def _setup_logging():
    level = os.environ.get("ENGINE_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="engine",
                                     description="multimodal embodied-agent engine")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the TCP protocol server")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=7777)
    serve.add_argument("--task", default="kick_the_ball",
                       choices=["kick_the_ball", "object_nav", "grab_object",
                                "multi_agent_nav"])
    serve.add_argument("--scene", default=None, help="custom scene JSON file")
    serve.add_argument("--agents", type=int, default=None)
    serve.add_argument("--obs", default="vision,audio,tactile,proprio",
                       help="comma-separated sensor list")
    serve.add_argument("--audio-mode", default="stereo",
                       choices=["mono", "stereo", "hrtf"])
    serve.add_argument("--hrtf-file", default=None)
    serve.add_argument("--seed", type=int, default=0)
    serve.add_argument("--max-envs", type=int, default=8)

    gen = sub.add_parser("gen", help="generate a supervised dataset")
    gen.add_argument("kind", choices=list(dataset.KINDS))
    gen.add_argument("--n", type=int, default=1000)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--audio-mode", default="stereo",
                     choices=["mono", "stereo", "hrtf"])

    bench_p = sub.add_parser("bench", help="throughput and kernel benchmarks")
    bench_p.add_argument("--steps", type=int, default=400)
    bench_p.add_argument("--compare-backends", action="store_true",
                         help="also time the pure-python fallback")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            from .server import serve_session
            defaults = {
                "task": args.task,
                "scene": args.scene,
                "agents": args.agents,
                "sensors": args.obs,
                "audio_mode": args.audio_mode,
                "hrtf_file": args.hrtf_file,
                "seed": args.seed,
            }
            serve_session(args.port, defaults=defaults, max_envs=args.max_envs,
                          host=args.host)
        elif args.command == "gen":
            manifest = dataset.generate(args.kind, args.n, args.seed, args.out,
                                        audio_mode=args.audio_mode)
            print(f"wrote {manifest.n} samples to {args.out}")
        elif args.command == "bench":
            from . import bench
            result = bench.standard_benchmark(args.steps)
            result["kernels"] = bench.kernel_benchmark()
            if args.compare_backends and result["backend"] == "compiled":
                result["pure_fallback"] = bench.run_pure_subprocess(
                    max(100, args.steps // 2))
            print(json.dumps(result, indent=1))
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
