"""Command-line interface: synth, solve, eval, pipeline.

Custom body geometry beyond the stock two- and three-body families goes
through a manifest file (see the pipeline command's --manifest flag); the
flags here cover the everyday runs.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ManifestError, NumericalError, ParseError
from .pipeline import RIGID_INIT, load_manifest, manifest_from_dict, run_pipeline
from .synth import DEFAULT_THREE_BODY_SEED, DEFAULT_TWO_BODY_SEED, default_three_body, default_two_body

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NUMERICAL = 3
EXIT_MANIFEST = 4


def _add_solver_flags(parser):
    parser.add_argument("--lambda1", type=float, default=None, help="l1 weight")
    parser.add_argument("--lambda2", type=float, default=None,
                        help="nuclear-norm weight (default: 1/sqrt(3*max(F,P)))")
    parser.add_argument("--beta0", type=float, default=None, help="initial penalty")
    parser.add_argument("--rho", type=float, default=None, help="penalty growth factor")
    parser.add_argument("--beta-max", type=float, default=None, help="penalty cap")
    parser.add_argument("--epsilon", type=float, default=None, help="convergence tolerance")
    parser.add_argument("--max-iters", type=int, default=None, help="iteration cap")


def _add_scene_source_flags(parser):
    parser.add_argument("--w", help="measurement matrix file (MBNR1 matrix)")
    parser.add_argument("--rotations",
                        help=f"stacked 2Fx3 rotation file, or '{RIGID_INIT}'")
    parser.add_argument("--s-gt", help="ground-truth shape file (enables e3d)")
    parser.add_argument("--labels-gt", help="ground-truth labels (enables ems)")
    parser.add_argument("--init-s", help="initial shape stack file")
    parser.add_argument("--grid", help="HxW grid enabling the spatial term")
    parser.add_argument("--sparse", action="store_true",
                        help="no spatial term (default when --grid is absent)")
    _add_synth_flags(parser)


def _add_synth_flags(parser):
    parser.add_argument("--bodies", type=int, choices=(2, 3), default=None,
                        help="generate a stock 2- or 3-body scene instead of reading files")
    parser.add_argument("--frames", type=int, default=30)
    parser.add_argument("--points-per-body", type=int, default=None)
    parser.add_argument("--basis-rank", type=int, default=2)
    parser.add_argument("--noise-sigma", type=float, default=0.0)
    parser.add_argument("--camera", choices=("identity", "smooth_random"),
                        default="smooth_random")


def _solver_block(args) -> dict:
    block = {}
    for key in ("lambda1", "lambda2", "beta0", "rho", "beta_max",
                "epsilon", "max_iters"):
        value = getattr(args, key, None)
        if value is not None:
            block[key] = value
    return block


def _synth_block(args, n_bodies: int) -> dict:
    if n_bodies == 2:
        factory, default_seed = default_two_body, DEFAULT_TWO_BODY_SEED
        ppb = args.points_per_body if args.points_per_body else 30
    else:
        factory, default_seed = default_three_body, DEFAULT_THREE_BODY_SEED
        ppb = args.points_per_body if args.points_per_body else 20
    config = factory(
        seed=args.seed if args.seed is not None else default_seed,
        frames=args.frames,
        points_per_body=ppb,
        basis_rank=args.basis_rank,
        noise_sigma=args.noise_sigma,
    )
    return {
        "frames": config.frames,
        "noise_sigma": config.noise_sigma,
        "camera_mode": args.camera,
        "seed": config.seed,
        "bodies": [
            {"points": b.points, "basis_rank": b.basis_rank,
             "centroid": list(b.centroid), "scale": b.scale}
            for b in config.bodies
        ],
    }


def _inputs_block(args) -> dict:
    inputs = {}
    if getattr(args, "w", None):
        inputs["w"] = args.w
    if getattr(args, "rotations", None):
        inputs["rotations"] = args.rotations
    if getattr(args, "s_gt", None):
        inputs["s_gt"] = args.s_gt
    if getattr(args, "labels_gt", None):
        inputs["labels_gt"] = args.labels_gt
    if getattr(args, "init_s", None):
        inputs["init_s"] = args.init_s
    if getattr(args, "grid", None):
        try:
            h, w = args.grid.lower().split("x")
            inputs["grid"] = [int(h), int(w)]
        except ValueError:
            raise ManifestError(f"--grid expects HxW, got {args.grid!r}") from None
    return inputs


def _manifest_data(args, command: str) -> dict:
    data = {
        "version": "MBNR1",
        "command": command,
        "output_dir": args.out,
        "seed": args.seed if args.seed is not None else 0,
        "solver": _solver_block(args),
        "inputs": _inputs_block(args),
    }
    if getattr(args, "clusters", None) is not None:
        data["clusters"] = args.clusters
    if getattr(args, "bodies", None):
        data["synth"] = _synth_block(args, args.bodies)
        data["seed"] = data["synth"]["seed"]
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbnrsfm",
        description="Joint 3D reconstruction and segmentation of multiple "
                    "deforming objects from 2D point tracks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=None)
    _add_synth_flags(p_synth)
    p_synth.set_defaults(bodies=2)

    p_solve = sub.add_parser("solve", help="run the solver on a scene")
    p_solve.add_argument("--out", required=True)
    p_solve.add_argument("--seed", type=int, default=None)
    _add_scene_source_flags(p_solve)
    _add_solver_flags(p_solve)

    p_eval = sub.add_parser("eval", help="evaluate labels/shapes against ground truth")
    p_eval.add_argument("--labels-est", required=True)
    p_eval.add_argument("--labels-gt", required=True)
    p_eval.add_argument("--s-est")
    p_eval.add_argument("--s-gt")
    p_eval.add_argument("--w")
    p_eval.add_argument("--rotations")
    p_eval.add_argument("--out", default="")

    p_pipe = sub.add_parser("pipeline", help="synth/load, solve, cluster, evaluate")
    p_pipe.add_argument("--manifest", help="run everything from a manifest JSON")
    p_pipe.add_argument("--out")
    p_pipe.add_argument("--clusters", type=int)
    p_pipe.add_argument("--seed", type=int, default=None)
    _add_scene_source_flags(p_pipe)
    _add_solver_flags(p_pipe)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "pipeline" and args.manifest:
            manifest = load_manifest(args.manifest)
        elif args.command == "eval":
            inputs = {"labels_est": args.labels_est, "labels_gt": args.labels_gt}
            if args.s_est:
                inputs["s_est"] = args.s_est
            if args.s_gt:
                inputs["s_gt"] = args.s_gt
            if args.w:
                inputs["w"] = args.w
            if args.rotations:
                inputs["rotations"] = args.rotations
            manifest = manifest_from_dict({
                "version": "MBNR1", "command": "eval",
                "output_dir": args.out, "inputs": inputs,
            })
        else:
            if args.command == "pipeline" and args.clusters is None:
                raise ManifestError("pipeline requires --clusters (or a manifest)")
            if not args.out:
                raise ManifestError(f"{args.command} requires --out")
            manifest = manifest_from_dict(_manifest_data(args, args.command))
        summary = run_pipeline(manifest)
    except ParseError as exc:
        print(f"mbnrsfm: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NumericalError as exc:
        print(f"mbnrsfm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ManifestError, ValueError) as exc:
        print(f"mbnrsfm: bad manifest or inputs: {exc}", file=sys.stderr)
        return EXIT_MANIFEST

    if "metrics" in summary:
        for key, value in summary["metrics"].items():
            print(f"{key}: {value}")
    else:
        print(f"{summary['command']}: done")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
