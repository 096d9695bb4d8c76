"""Command-line entry point: ``uwimaging <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error. On
failure one JSON object is written to stderr and any files the command had
already written are removed.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._validation import DataError
from .colorstats import LabStatsModel, fit_model, lab_score
from .estimator import DEFAULT_WEIGHTS, EstimatorConfig, enhance, estimate
from .imaging import DegradationParams, absolutize_depth, degrade, restore
from .io import (
    dumps_json,
    find_depth,
    list_images,
    load_depth,
    load_image,
    read_json,
    save_image,
)
from .metrics import (
    combined_loss,
    degradation_consistency_loss,
    evaluate,
    proximity_from_depth,
    weighted_reference_loss,
)
from .synthesis import build_manifest, derive_seed, pick_backlight, synthesize_one
from .water import load_table

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def _weights(text):
    values = _floats(text)
    if len(values) != 3:
        raise argparse.ArgumentTypeError("--weights needs exactly three values: w_lab,w_clip,w_gray")
    return tuple(values)


class _Outputs:
    """Tracks files written by a command so a failure can remove them."""

    def __init__(self):
        self.files = []
        self.dirs = []

    def directory(self, path):
        path = Path(path)
        missing = []
        p = path
        while not p.exists():
            missing.append(p)
            p = p.parent
        path.mkdir(parents=True, exist_ok=True)
        self.dirs.extend(reversed(missing))
        return path

    def file(self, path):
        path = Path(path)
        if path.parent != Path(""):
            self.directory(path.parent)
        self.files.append(path)
        return path

    def write_json(self, path, obj):
        self.file(path).write_text(dumps_json(obj))

    def save_image(self, path, img):
        save_image(self.file(path), img)

    def rollback(self):
        for path in reversed(self.files):
            path.unlink(missing_ok=True)
        for path in reversed(self.dirs):
            try:
                path.rmdir()
            except OSError:
                pass


def _require(path, kind="file"):
    if path is None:
        return None
    p = Path(path)
    ok = p.is_dir() if kind == "dir" else p.is_file()
    if not ok:
        raise DataError(f"{p}: no such {'directory' if kind == 'dir' else 'file'}")
    return p


def _load_model(path):
    if path is None:
        raise UsageError("this command needs --lab-model")
    return LabStatsModel.load(_require(path))


def _load_params(path):
    data = read_json(_require(path))
    if isinstance(data, dict) and "params" in data:
        data = data["params"]
    if not isinstance(data, dict):
        raise DataError(f"{path}: expected a parameter object")
    return DegradationParams.from_dict(data)


def _estimator_config(args):
    grid = tuple((args.scale_min, d) for d in args.grid_dmax)
    return EstimatorConfig(
        depth_scale_grid=grid,
        refine=not args.no_refine,
        refine_iters=args.refine_iters,
        b_inf_window=args.b_inf_window,
        objective_weights=args.weights,
        topk=args.topk,
        n_jobs=args.jobs,
    )


# --- commands ---------------------------------------------------------------

def cmd_synthesize(args, out):
    clean_dir = _require(args.input, "dir")
    depth_dir = _require(args.depth, "dir")
    light_dir = _require(args.backlight or args.input, "dir")
    table = load_table(_require(args.table))
    clean_paths = list_images(clean_dir)
    light_paths = list_images(light_dir)
    if not clean_paths:
        raise DataError(f"{clean_dir}: no PNG/PPM images")
    if not light_paths:
        raise DataError(f"{light_dir}: no PNG/PPM background-light images")
    depth_paths = [find_depth(depth_dir, p.stem) for p in clean_paths]
    lights = [load_image(p) for p in light_paths]
    out_dir = out.directory(args.output)

    entries, samples = [], []
    for pos, (cpath, dpath) in enumerate(zip(clean_paths, depth_paths)):
        seed = derive_seed(args.seed, pos)
        if args.grid_dmax is not None:
            grid = args.grid_dmax
            d_max = float(grid[int(np.random.default_rng([seed, 2]).integers(len(grid)))])
        else:
            d_max = args.scale_max
        k = pick_backlight(seed, len(lights))
        sample = synthesize_one(
            load_image(cpath), load_depth(dpath, args.invert_depth), table, lights[k],
            (args.scale_min, d_max), seed, backlight_index=k,
        )
        name = f"degraded/{cpath.stem}.png"
        out.save_image(out_dir / name, sample.degraded)
        samples.append(sample)
        entries.append({
            "clean": cpath.name, "depth": dpath.name, "degraded": name,
            "backlight": light_paths[k].name,
        })
    manifest = build_manifest(samples, args.seed, entries)
    out.write_json(out_dir / "manifest.json", manifest)
    return {"count": len(samples), "manifest": str(out_dir / "manifest.json")}


def _image_and_depth(args):
    img = load_image(_require(args.input))
    depth = load_depth(_require(args.depth), args.invert_depth)
    return img, depth


def cmd_estimate(args, out):
    model = _load_model(args.lab_model)
    table = load_table(_require(args.table))
    img, depth = _image_and_depth(args)
    cfg = _estimator_config(args)
    est = estimate(img, depth, table, model, cfg)
    est.metadata["input"] = Path(args.input).name
    est.metadata["depth"] = Path(args.depth).name
    out.write_json(args.output, est.to_dict())
    return {"output": str(args.output), "objective": est.objective}


def cmd_restore(args, out):
    params = _load_params(args.params)
    img, depth = _image_and_depth(args)
    restored, mask = restore(img, absolutize_depth(depth, params.depth_scale), params)
    out.save_image(args.output, restored)
    return {"output": str(args.output), "flagged_fraction": float(mask.mean())}


def cmd_enhance(args, out):
    model = _load_model(args.lab_model)
    table = load_table(_require(args.table))
    img, depth = _image_and_depth(args)
    restored, est, predicted = enhance(img, depth, table, model, _estimator_config(args))
    est.metadata["input"] = Path(args.input).name
    est.metadata["depth"] = Path(args.depth).name
    out_dir = out.directory(args.output)
    out.save_image(out_dir / "restored.png", restored)
    out.save_image(out_dir / "predicted_degraded.png", predicted)
    out.write_json(out_dir / "params.json", est.to_dict())
    return {"output": str(out_dir), "objective": est.objective}


def cmd_score(args, out):
    img = load_image(_require(args.input))
    reference = load_image(_require(args.reference)) if args.reference else None
    depth = load_depth(_require(args.depth), args.invert_depth) if args.depth else None
    model = LabStatsModel.load(_require(args.lab_model)) if args.lab_model else None

    report = {"metrics": evaluate(img, reference).to_dict(), "losses": {}}
    losses = report["losses"]
    if reference is not None and depth is not None:
        losses["reference"] = weighted_reference_loss(img, reference, proximity_from_depth(depth.values))
    if model is not None:
        losses["lab"] = lab_score(img, model)
    if args.raw:
        if args.params is None or depth is None:
            raise UsageError("--raw needs --params and --depth for the degradation term")
        raw = load_image(_require(args.raw))
        params = _load_params(args.params)
        predicted, _ = degrade(img, absolutize_depth(depth, params.depth_scale), params)
        losses["degradation"] = degradation_consistency_loss(raw, predicted)
    if {"reference", "lab", "degradation"} <= losses.keys():
        losses["combined"] = combined_loss(losses["reference"], losses["degradation"], losses["lab"])
    report["losses"] = {k: float(v) for k, v in losses.items()}
    if args.output:
        out.write_json(args.output, report)
    else:
        sys.stdout.write(dumps_json(report))
    return None


def cmd_stats(args, out):
    paths = list_images(_require(args.input, "dir"))
    if len(paths) < 2:
        raise DataError(f"{args.input}: fitting needs at least 2 images, found {len(paths)}")
    model = fit_model([load_image(p) for p in paths], {"sources": [p.name for p in paths]})
    out.write_json(args.output, model.to_dict())
    return {"output": str(args.output), "image_count": len(paths)}


def cmd_eval(args, out):
    results = list_images(_require(args.input, "dir"))
    ref_dir = _require(args.reference, "dir")
    if not results:
        raise DataError(f"{args.input}: no PNG/PPM images")
    refs = {p.stem: p for p in list_images(ref_dir)}
    rows = []
    for path in results:
        if path.stem not in refs:
            raise DataError(f"no reference image for {path.name} in {ref_dir}")
        metrics = evaluate(load_image(path), load_image(refs[path.stem])).to_dict()
        rows.append({"name": path.stem, **metrics})
    keys = ("psnr", "ssim", "uiqm", "uciqe")
    mean = {k: float(np.mean([r[k] for r in rows])) for k in keys}
    report = {"pairs": rows, "mean": mean, "count": len(rows)}
    if args.output:
        out.write_json(args.output, report)
    width = max(len("mean"), *(len(r["name"]) for r in rows))
    lines = [f"{'image':<{width}}  {'PSNR':>8}  {'SSIM':>7}  {'UIQM':>7}  {'UCIQE':>7}"]
    for r in rows + [{"name": "mean", **mean}]:
        lines.append(
            f"{r['name']:<{width}}  {r['psnr']:8.3f}  {r['ssim']:7.4f}  {r['uiqm']:7.3f}  {r['uciqe']:7.4f}"
        )
    sys.stdout.write("\n".join(lines) + "\n")
    return None


COMMANDS = {
    "synthesize": cmd_synthesize,
    "estimate": cmd_estimate,
    "restore": cmd_restore,
    "enhance": cmd_enhance,
    "score": cmd_score,
    "stats": cmd_stats,
    "eval": cmd_eval,
}


def build_parser():
    parser = _Parser(prog="uwimaging", description="Underwater image formation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text, output_required=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--input", required=True)
        p.add_argument("--output", required=output_required)
        p.add_argument("--seed", type=int, default=0)
        return p

    def depth_args(p, required=True):
        p.add_argument("--depth", required=required)
        p.add_argument("--invert-depth", action="store_true")

    def estimator_args(p):
        p.add_argument("--table")
        p.add_argument("--lab-model")
        p.add_argument("--scale-min", type=float, default=0.5)
        p.add_argument("--grid-dmax", type=_floats, default=[2.0, 4.0, 6.0, 8.0, 10.0])
        p.add_argument("--weights", type=_weights, default=DEFAULT_WEIGHTS)
        p.add_argument("--topk", type=int, default=5)
        p.add_argument("--no-refine", action="store_true")
        p.add_argument("--refine-iters", type=int, default=3)
        p.add_argument("--b-inf-window", type=float, default=1.0)
        p.add_argument("--jobs", type=int, default=None)

    p = add("synthesize", "degrade a clean RGB-D corpus with random water types")
    depth_args(p)
    p.add_argument("--backlight", help="directory of underwater images for the background light")
    p.add_argument("--table")
    p.add_argument("--scale-min", type=float, default=0.5)
    p.add_argument("--scale-max", type=float, default=10.0)
    p.add_argument("--grid-dmax", type=_floats, default=None,
                   help="draw each sample's far depth from these values instead of --scale-max")

    p = add("estimate", "estimate degradation parameters")
    depth_args(p)
    estimator_args(p)

    p = add("restore", "invert the formation model with given parameters")
    depth_args(p)
    p.add_argument("--params", required=True)

    p = add("enhance", "estimate, restore and re-degrade")
    depth_args(p)
    estimator_args(p)

    p = add("score", "quality metrics and losses for one image", output_required=False)
    depth_args(p, required=False)
    p.add_argument("--reference")
    p.add_argument("--lab-model")
    p.add_argument("--raw", help="degraded input the image was restored from")
    p.add_argument("--params")

    add("stats", "fit a Lab statistics model to a reference directory")

    p = add("eval", "metric table of a result directory against references", output_required=False)
    p.add_argument("--reference", required=True)
    return parser


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": {"code": code, "type": kind, "message": message}}) + "\n")
    return code


def run(argv=None):
    out = _Outputs()
    try:
        args = build_parser().parse_args(argv)
        summary = COMMANDS[args.command](args, out)
    except UsageError as exc:
        out.rollback()
        return _fail(EXIT_USAGE, "usage", str(exc))
    except DataError as exc:
        out.rollback()
        return _fail(EXIT_DATA, "data", str(exc))
    except OSError as exc:
        out.rollback()
        return _fail(EXIT_DATA, "data", f"{exc.filename or ''}: {exc.strerror or exc}")
    except Exception as exc:  # noqa: BLE001 - report anything else as internal
        out.rollback()
        return _fail(EXIT_INTERNAL, "internal", f"{type(exc).__name__}: {exc}")
    if summary is not None:
        sys.stderr.write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
