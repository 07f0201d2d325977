"""Command line front end: build, render, reference, compare and bench."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .geometry import set_threads
from .pipeline import (ConfigError, bench, compare, load_config, render_reference_only,
                       run_pipeline, with_overrides)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("hybridsdf")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridsdf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="TOML render config")
        sp.add_argument("--threads", type=int, help="worker threads (default: all)")
        sp.add_argument("--frames", type=int, help="override the frame count")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="override rng_seed (unsigned 64-bit)")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("build", help="write coarse/fine SDF dumps only"))
    common(sub.add_parser("render", help="full pipeline with images and metrics"))
    common(sub.add_parser("reference", help="ground-truth visibility for the last frame"))
    cmp_ = sub.add_parser("compare", help="metrics between two visibility images")
    common(cmp_, config_required=False)
    cmp_.add_argument("sdf_image")
    cmp_.add_argument("ref_image")
    b = sub.add_parser("bench", help="stage timings over coarse resolutions")
    common(b)
    b.add_argument("--resolutions", default="16,32,64",
                   help="comma separated coarse resolutions")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = None
        if args.config:
            cfg = with_overrides(load_config(args.config), frames=args.frames,
                                 rng_seed=args.seed, output_dir=args.out)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            set_threads(args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "build":
            res = run_pipeline(cfg, render=False)
            print(json.dumps({"output_dir": str(res.output_dir), "files": res.files}))
        elif args.command == "render":
            res = run_pipeline(cfg, render=True)
            print(json.dumps({"output_dir": str(res.output_dir), "metrics": res.metrics}))
        elif args.command == "reference":
            print(render_reference_only(cfg))
        elif args.command == "compare":
            m = compare(cfg, args.sdf_image, args.ref_image)
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / "metrics.json").write_text(json.dumps(m, indent=2, sort_keys=True))
            print(json.dumps(m, sort_keys=True))
        elif args.command == "bench":
            try:
                resolutions = [int(r) for r in args.resolutions.split(",") if r]
            except ValueError:
                print("config error: --resolutions must be integers", file=sys.stderr)
                return EXIT_CONFIG
            print(json.dumps(bench(cfg, resolutions), indent=2))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
