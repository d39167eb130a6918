"""Command-line entry point: ``flowmots {eval,synth,track,cost}``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

import argparse
import json
import logging
import os
import sys

from . import io_formats, synthetic
from .errors import FlowMotsError
from .metrics import CLASS_IDS, CLASS_NAMES, FrameAnnotations, combine, evaluate, format_csv, format_table
from .pipeline import (
    SequenceFrame,
    cost_ratio,
    detections_of,
    exact_cost_ratio,
    file_source,
    run_sequence,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="flowmots", description="MOTS tracking, evaluation and synthetic data.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("--gt", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--class", dest="cls", choices=("car", "pedestrian", "all"), default="all")
    e.add_argument("--csv", help="also write the report as CSV to this path")

    s = sub.add_parser("synth", help="generate a synthetic sequence with detections")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--frames", type=int, default=20)
    s.add_argument("--objects", type=int, default=4)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--noise", choices=sorted(synthetic.NOISE_PRESETS), default="none")

    t = sub.add_parser("track", help="run the online tracker over a detection file")
    t.add_argument("--detections", required=True)
    t.add_argument("--gt")
    t.add_argument("--config")
    t.add_argument("--scene", help="scene.json from synth; defaults to the one next to the detections")
    t.add_argument("--out", help="write tracked results in annotation format")
    t.add_argument("--summary", help="write the JSON summary here instead of stdout")

    c = sub.add_parser("cost", help="print the runtime ratio against the 3-D convolution baseline")
    c.add_argument("--config", required=True)
    return p


def _scores_for(scores, cls):
    if cls == "all":
        out = dict(scores)
        out["all"] = combine(scores.values())
        return out
    cid = CLASS_IDS[cls]
    return {cid: scores[cid]} if cid in scores else {}


def cmd_eval(args):
    gt = io_formats.parse_file(args.gt)
    pred = io_formats.parse_file(args.pred)
    for ann in list(gt.values()) + list(pred.values()):
        ann.validate()
    scores = _scores_for(evaluate(gt, pred), args.cls)
    if not scores or all(s.n_gt == 0 for s in scores.values()):
        raise FlowMotsError("no ground-truth objects for the requested class")
    sys.stdout.write(format_table(scores))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_csv(scores))
    return EXIT_OK


def cmd_synth(args):
    if args.frames < 1 or args.objects < 0:
        raise FlowMotsError("--frames must be >= 1 and --objects >= 0")
    spec = synthetic.SceneSpec(frames=args.frames, n_objects=args.objects, seed=args.seed)
    seq = synthetic.generate_sequence(spec)
    model = synthetic.NOISE_PRESETS[args.noise]
    gt = {t: seq.gt(t) for t in range(seq.n_frames)}
    dets = {t: synthetic.perturb(gt[t], model, args.seed) for t in range(seq.n_frames)}
    io_formats.ensure_dir(args.out_dir)
    io_formats.write_file(os.path.join(args.out_dir, "gt.txt"), gt)
    io_formats.write_file(os.path.join(args.out_dir, "detections.txt"), dets)
    scene = {"scene": synthetic.spec_to_dict(seq.spec), "noise": args.noise, "noise_seed": args.seed}
    with open(os.path.join(args.out_dir, "scene.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(scene, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def _scene_source(scene, detections, gt):
    seq = synthetic.generate_sequence(synthetic.spec_from_dict(scene["scene"]))
    model = synthetic.NOISE_PRESETS[scene.get("noise", "none")]
    seed = int(scene.get("noise_seed", 0))
    for t in range(seq.n_frames):
        ann = detections.get(t, FrameAnnotations(t))
        yield SequenceFrame(
            t,
            synthetic.noisy_features(seq, t, model, seed),
            detections_of(ann),
            gt.get(t, FrameAnnotations(t)) if gt is not None else None,
            lambda j, t=t: synthetic.noisy_flow(seq, j, t, model, seed),
        )


def cmd_track(args):
    mapping = io_formats.load_config(args.config) if args.config else {}
    cfg = io_formats.RunConfig.from_mapping(mapping)
    params = cfg.pipeline_params()
    detections = io_formats.parse_file(args.detections)
    gt = io_formats.parse_file(args.gt) if args.gt else None
    scene_path = args.scene
    if scene_path is None:
        guess = os.path.join(os.path.dirname(os.path.abspath(args.detections)), "scene.json")
        scene_path = guess if os.path.exists(guess) else None
    if scene_path:
        with open(scene_path, encoding="utf-8") as fh:
            scene = json.load(fh)
        source = _scene_source(scene, detections, gt)
    else:
        source = file_source(detections, gt)
    run = run_sequence(source, params)
    results = {r.frame: r.to_annotations() for r in run.results}
    if args.out:
        io_formats.write_file(args.out, results)
    metrics = None
    if run.scores is not None:
        metrics = {
            ("all" if k == "all" else CLASS_NAMES.get(k, str(k))): s.as_dict()
            for k, s in _scores_for(run.scores, "all").items()
        }
    summary = {
        "params": cfg.as_dict(),
        "frames": len(run.results),
        "objects": sum(len(r) for r in run.results),
        "metrics": metrics,
        "timings": run.timings,
    }
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.summary:
        with open(args.summary, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK



def cmd_cost(args):
    model = io_formats.cost_model_from_mapping(io_formats.load_config(args.config))
    print(f"ratio {cost_ratio(model):.6f}")
    print(f"ratio_with_heads {exact_cost_ratio(model):.6f}")
    return EXIT_OK


COMMANDS = {"eval": cmd_eval, "synth": cmd_synth, "track": cmd_track, "cost": cmd_cost}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (FlowMotsError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"flowmots {args.command}: error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
