"""Command-line interface: pocgm <subcommand>."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import RunConfig
from .denoiser import load_loss_trace, load_model
from .fbp import FilterSpec, fbp_reconstruct
from .fileio import (
    read_geometry,
    read_image,
    read_sinogram,
    write_image,
    write_sinogram,
)
from .geometry import sample_views, uniform_mask
from .metrics import MetricReport
from .phantoms import Ellipse, PhantomSpec, generate_ellipse_phantom, random_phantom_spec
from .pipeline import end_to_end, make_dataset, train_from_dataset
from .projector import siddon_forward
from .sampler import SamplerConfig, reconstruct


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh))


def _cmd_phantom(args) -> int:
    with open(args.spec) as fh:
        spec_doc = json.load(fh)
    if "ellipses" in spec_doc:
        spec = PhantomSpec(
            [Ellipse(**e) for e in spec_doc["ellipses"]], seed=spec_doc.get("seed", 0)
        )
        width = int(spec_doc.get("width", 64))
        height = int(spec_doc.get("height", 64))
        pixel_size = float(spec_doc.get("pixel_size", 6.25))
    else:
        width = int(spec_doc.get("width", 64))
        height = int(spec_doc.get("height", 64))
        pixel_size = float(spec_doc.get("pixel_size", 6.25))
        fov = 0.5 * min(width, height) * pixel_size * 0.98
        seed = args.seed if args.seed is not None else spec_doc.get("seed", 0)
        spec = random_phantom_spec(int(seed), fov)
    image = generate_ellipse_phantom(spec, width, height, pixel_size)
    write_image(image, args.out)
    print(f"wrote {width}x{height} phantom to {args.out}")
    return 0


def _cmd_project(args) -> int:
    image = read_image(args.image)
    geom = read_geometry(args.geom)
    sino = siddon_forward(image, geom)
    write_sinogram(sino, args.out)
    print(f"wrote {sino.num_views}x{sino.detector_count} sinogram to {args.out}")
    return 0


def _cmd_subsample(args) -> int:
    sino = read_sinogram(args.sino)
    mask = uniform_mask(sino.num_views, args.keep)
    sparse = sample_views(sino, mask)
    write_sinogram(sparse, args.out)
    print(f"kept {sparse.num_views} of {sino.num_views} views -> {args.out}")
    return 0


def _cmd_fbp(args) -> int:
    sino = read_sinogram(args.sino)
    geom = read_geometry(args.geom) if args.geom else sino.geometry
    width, height = (int(v) for v in args.grid.lower().split("x"))
    spec = FilterSpec(args.filter, args.cutoff)
    image = fbp_reconstruct(sino, geom, (width, height), args.pixel_size, spec)
    write_image(image, args.out)
    print(f"wrote {width}x{height} reconstruction to {args.out}")
    return 0


def _cmd_make_dataset(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    manifest = make_dataset(config, args.count, args.out_dir, offset=args.offset)
    print(f"wrote manifest {manifest}")
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    if args.iters is not None:
        config.train.iterations = args.iters
    if args.seed is not None:
        config.train.seed = args.seed
    _, trace = train_from_dataset(config, args.data, args.out, trace_path=args.loss_trace)
    print(f"trained {len(trace)} iterations, final loss {trace[-1][1]:.6g} -> {args.out}")
    return 0


def _cmd_loss_trace(args) -> int:
    trace = load_loss_trace(args.model)
    if not trace:
        print("model file carries no loss trace", file=sys.stderr)
        return 1
    with open(args.out, "w") as fh:
        fh.write("iteration,loss\n")
        for it, loss in trace:
            fh.write(f"{it},{loss:.10g}\n")
    print(f"wrote {len(trace)} rows to {args.out}")
    return 0


def _cmd_sample(args) -> int:
    if not os.path.exists(args.model):
        print(f"model file not found: {args.model}", file=sys.stderr)
        return 1
    model = load_model(args.model)
    sparse = read_sinogram(args.sparse_sino)
    geom = read_geometry(args.geom) if args.geom else sparse.geometry
    pfgm = model.pfgm
    if args.aug_dim is not None:
        pfgm.aug_dim = args.aug_dim
    cfg = SamplerConfig(steps=args.steps, integrator=args.integrator, pfgm=pfgm)
    rng = np.random.default_rng(args.seed)
    width, height = (int(v) for v in args.grid.lower().split("x"))
    image = reconstruct(
        sparse,
        geom,
        model,
        cfg,
        FilterSpec(args.filter, 1.0),
        rng,
        (width, height),
        args.pixel_size,
    )
    write_image(image, args.out)
    print(f"wrote reconstruction to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    pred_files = sorted(
        f for f in os.listdir(args.pred) if f.endswith(".raw") and not f.endswith(".json")
    )
    report = MetricReport()
    for name in pred_files:
        pred = read_image(os.path.join(args.pred, name))
        gt_path = os.path.join(args.gt, name.replace("recon_", "gt_"))
        if not os.path.exists(gt_path):
            print(f"no ground truth for {name}, skipping", file=sys.stderr)
            continue
        gt = read_image(gt_path)
        if args.window:
            from .grid import DisplayWindow, hu_window

            lo, hi = (float(v) for v in args.window.split(","))
            win = DisplayWindow(lo, hi)
            gt, pred = hu_window(gt, win), hu_window(pred, win)
        report.add(name, gt, pred)
    report.write_csv(args.out)
    print(f"wrote metrics for {len(report.rows)} images to {args.out}")
    return 0


def _cmd_end_to_end(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    summary = end_to_end(
        config,
        args.out_dir,
        train_count=args.train_count,
        eval_count=args.eval_count,
    )
    print(
        f"PSNR: pocgm {summary['pocgm_psnr']:.3f} dB vs sparse FBP "
        f"{summary['fbp_psnr']:.3f} dB; SSIM: {summary['pocgm_ssim']:.4f} vs "
        f"{summary['fbp_ssim']:.4f}"
    )
    if args.check:
        ok = (
            summary["pocgm_psnr"] >= summary["fbp_psnr"] + 2.0
            and summary["pocgm_ssim"] > summary["fbp_ssim"]
        )
        print("check: " + ("PASS" if ok else "FAIL"))
        return 0 if ok else 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pocgm",
        description="Conditional Poisson-flow generation for sparse-view fan-beam CT.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("phantom", help="generate an ellipse phantom image")
    sp.add_argument("--spec", required=True, help="JSON phantom spec")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=_cmd_phantom)

    sp = sub.add_parser("project", help="fan-beam forward projection")
    sp.add_argument("--image", required=True)
    sp.add_argument("--geom", required=True, help="geometry JSON")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_project)

    sp = sub.add_parser("subsample", help="keep a uniform subset of views")
    sp.add_argument("--sino", required=True)
    sp.add_argument("--keep", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_subsample)

    sp = sub.add_parser("fbp", help="filtered backprojection")
    sp.add_argument("--sino", required=True)
    sp.add_argument("--geom", default=None, help="geometry JSON (default: sinogram sidecar)")
    sp.add_argument("--grid", default="64x64", help="WxH")
    sp.add_argument("--pixel-size", type=float, default=6.25)
    sp.add_argument("--filter", default="ram-lak", choices=["ram-lak", "shepp-logan-apodized"])
    sp.add_argument("--cutoff", type=float, default=1.0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_fbp)

    sp = sub.add_parser("make-dataset", help="paired sparse/full training corpus")
    sp.add_argument("--config", default=None)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--offset", type=int, default=0)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=_cmd_make_dataset)

    sp = sub.add_parser("train", help="train the conditional denoiser")
    sp.add_argument("--data", required=True, help="dataset directory")
    sp.add_argument("--out", required=True, help="model file (.npz)")
    sp.add_argument("--config", default=None)
    sp.add_argument("--iters", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--loss-trace", default=None, help="also write the trace CSV here")
    sp.set_defaults(func=_cmd_train)

    sp = sub.add_parser("loss-trace", help="dump the loss trace stored in a model file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_loss_trace)

    sp = sub.add_parser("sample", help="conditional reconstruction from a sparse sinogram")
    sp.add_argument("--model", required=True)
    sp.add_argument("--sparse-sino", required=True)
    sp.add_argument("--geom", default=None)
    sp.add_argument("--steps", type=int, default=16)
    sp.add_argument("--integrator", default="heun", choices=["euler", "heun"])
    sp.add_argument("--D", dest="aug_dim", type=int, default=None)
    sp.add_argument("--grid", default="64x64")
    sp.add_argument("--pixel-size", type=float, default=6.25)
    sp.add_argument("--filter", default="shepp-logan-apodized")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_sample)

    sp = sub.add_parser("eval", help="PSNR/SSIM between prediction and ground-truth dirs")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--window", default=None, help="lo,hi display window (default: full range)")
    sp.set_defaults(func=_cmd_eval)

    sp = sub.add_parser("end-to-end", help="dataset -> train -> sample -> metrics")
    sp.add_argument("--config", default=None)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--train-count", type=int, default=200)
    sp.add_argument("--eval-count", type=int, default=20)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--check", action="store_true", help="exit nonzero unless the improvement criterion holds")
    sp.set_defaults(func=_cmd_end_to_end)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
