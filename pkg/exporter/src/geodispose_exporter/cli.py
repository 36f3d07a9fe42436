"""Command line for producing and checking proposal interchange files.

Subcommands:
  export   write a manifest + GDDF rasters from a TUM sequence directory
  verify   re-read an exported manifest and validate every raster

Exit codes: 0 ok, 1 bad arguments, 2 export/verify failure.
"""

from __future__ import annotations

import argparse
import sys

from .export import GT_SYNTH, ExportJob, export
from .tum import ExportError
from .verify import verify

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILURE = 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geodispose-export", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("export", help="export a sequence to interchange files")
    ex.add_argument("--sequence", required=True,
                    help="TUM sequence directory (rgb.txt/depth.txt/...)")
    ex.add_argument("--out", required=True, help="output directory")
    ex.add_argument("--strides", default="1", help="comma list of frame gaps")
    ex.add_argument("--mode", default=GT_SYNTH,
                    help=f"{GT_SYNTH!r} or a model plugin module name")
    ex.add_argument("--rot-deg", type=float, default=0.0,
                    help="gt-synth pose perturbation rotation, degrees")
    ex.add_argument("--trans-m", type=float, default=0.0,
                    help="gt-synth pose perturbation translation, meters")
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--intrinsics", default=None,
                    help="override as fx,fy,cx,cy,width,height")

    vf = sub.add_parser("verify", help="validate an exported manifest")
    vf.add_argument("manifest")
    return p


def _parse_intrinsics(s: str) -> tuple:
    f = s.split(",")
    if len(f) != 6:
        raise ValueError("--intrinsics expects fx,fy,cx,cy,width,height")
    return (float(f[0]), float(f[1]), float(f[2]), float(f[3]),
            int(f[4]), int(f[5]))


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK
    try:
        if args.command == "export":
            job = ExportJob(
                sequence_root=args.sequence, out_dir=args.out,
                strides=[int(s) for s in str(args.strides).split(",") if s],
                mode=args.mode, rot_deg=args.rot_deg, trans_m=args.trans_m,
                seed=args.seed,
                intrinsics=(_parse_intrinsics(args.intrinsics)
                            if args.intrinsics else None))
            manifest = export(job)
            print(f"wrote {manifest}")
            return EXIT_OK
        report = verify(args.manifest)
        print(report.render(), end="")
        return EXIT_OK if report.ok else EXIT_FAILURE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ExportError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
