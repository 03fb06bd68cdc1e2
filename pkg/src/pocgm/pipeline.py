"""Stage orchestration: dataset synthesis, end-to-end training and evaluation."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import RunConfig, phantom_seed
from .denoiser import ConditionalDenoiser, IntensityTransform, save_model
from .fbp import fbp_reconstruct
from .fileio import read_image, read_sinogram, write_image, write_sinogram
from .geometry import sample_views, uniform_mask
from .grid import ImageGrid
from .metrics import MetricReport
from .network import TinyNet
from .phantoms import generate_ellipse_phantom, random_phantom_spec
from .projector import siddon_forward
from .sampler import reconstruct
from .training import train, write_loss_trace


def _max_workers() -> int:
    try:
        return max(1, int(os.environ.get("POCGM_THREADS", "1")))
    except ValueError:
        return 1


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _generate_one(config: RunConfig, file_index: int, phantom_index: int, out_dir: str) -> list[str]:
    """Phantom -> full sinogram -> sparse sinogram -> sparse FBP; returns paths."""
    geom = config.geometry()
    spec = random_phantom_spec(
        phantom_seed(config.seed, phantom_index), config.fov_radius * 0.98
    )
    phantom = generate_ellipse_phantom(spec, config.width, config.height, config.pixel_size)

    full = siddon_forward(phantom, geom)
    mask = uniform_mask(config.full_views, config.kept_views)
    sparse = sample_views(full, mask)
    grid = (config.width, config.height)
    sparse_fbp = fbp_reconstruct(
        sparse, sparse.geometry, grid, config.pixel_size, config.filter_spec()
    )
    if config.ground_truth == "phantom":
        gt = phantom
    else:
        gt = fbp_reconstruct(full, geom, grid, config.pixel_size, config.filter_spec())

    paths = [
        os.path.join(out_dir, f"gt_{file_index:04d}.raw"),
        os.path.join(out_dir, f"full_{file_index:04d}.sino"),
        os.path.join(out_dir, f"sparse_{file_index:04d}.sino"),
        os.path.join(out_dir, f"fbp_{file_index:04d}.raw"),
    ]
    write_image(gt, paths[0])
    write_sinogram(full, paths[1])
    write_sinogram(sparse, paths[2])
    write_image(sparse_fbp, paths[3])
    return paths


def make_dataset(config: RunConfig, count: int, out_dir: str, offset: int = 0) -> str:
    """Write ``count`` paired training examples plus a hash manifest.

    Every artifact is derived deterministically from (config.seed, offset+i),
    so re-running reproduces identical file hashes; ``offset`` selects a
    disjoint slice of the same seeded phantom family (used for held-out
    splits).  POCGM_THREADS caps the number of concurrent worker threads.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    os.makedirs(out_dir, exist_ok=True)
    command = f"pocgm make-dataset --count {count} --seed {config.seed}" + (
        f" --offset {offset}" if offset else ""
    )

    workers = _max_workers()
    job = lambda i: _generate_one(config, i, offset + i, out_dir)  # noqa: E731
    if workers > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_paths = list(pool.map(job, range(count)))
    else:
        all_paths = [job(i) for i in range(count)]

    entries = []
    for group in all_paths:
        for p in group:
            for f in (p, p + ".json"):
                entries.append(
                    {"path": os.path.basename(f), "sha256": _sha256(f), "command": command}
                )
    manifest = {"config": config.to_dict(), "count": count, "entries": entries}
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest_path


def load_pairs(data_dir: str) -> list[tuple[ImageGrid, ImageGrid]]:
    """(ground truth, sparse FBP condition) pairs listed by the manifest."""
    with open(os.path.join(data_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    count = int(manifest["count"])
    pairs = []
    for i in range(count):
        gt = read_image(os.path.join(data_dir, f"gt_{i:04d}.raw"))
        cond = read_image(os.path.join(data_dir, f"fbp_{i:04d}.raw"))
        pairs.append((gt, cond))
    return pairs


def compute_transform(pairs: list[tuple[ImageGrid, ImageGrid]]) -> IntensityTransform:
    """Global min/max over the clean images.

    Conditions are passed through the same affine map but may exceed [0, 1]:
    sparse-view FBP streaks overshoot far beyond the clean intensity range,
    and pooling them into the normalization would compress the clean targets
    into a fraction of the unit interval.
    """
    lo = min(a.values.min() for a, _ in pairs)
    hi = max(a.values.max() for a, _ in pairs)
    if hi <= lo:
        hi = lo + 1.0
    return IntensityTransform(float(lo), float(hi))


def train_from_dataset(
    config: RunConfig, data_dir: str, model_path: str, trace_path: str | None = None
):
    """Train the conditional model on a dataset directory; saves an EMA model."""
    pairs = load_pairs(data_dir)
    transform = compute_transform(pairs)
    normalized = [
        (transform.normalize(gt.values), transform.normalize(cond.values))
        for gt, cond in pairs
    ]
    net = TinyNet(config.net(), in_channels=3, seed=config.train.seed)
    model = ConditionalDenoiser(net, config.pfgm(), transform)
    ema_model, trace = train(model, normalized, config.train, config.pfgm())
    save_model(ema_model, model_path, loss_trace=trace)
    if trace_path:
        write_loss_trace(trace, trace_path)
    return ema_model, trace


def evaluate_split(
    config: RunConfig,
    data_dir: str,
    model: ConditionalDenoiser,
    out_dir: str | None = None,
) -> dict:
    """Reconstruct every image of a split and score against the ground truth.

    Returns MetricReports for the generative reconstruction and for the plain
    sparse-view FBP baseline, keyed "pocgm" and "sparse_fbp".
    """
    with open(os.path.join(data_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    count = int(manifest["count"])
    sampler_cfg = config.sampler()

    report_gen = MetricReport()
    report_fbp = MetricReport()
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    for i in range(count):
        gt = read_image(os.path.join(data_dir, f"gt_{i:04d}.raw"))
        cond = read_image(os.path.join(data_dir, f"fbp_{i:04d}.raw"))
        sparse = read_sinogram(os.path.join(data_dir, f"sparse_{i:04d}.sino"))
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 7, i]))
        recon = reconstruct(
            sparse,
            sparse.geometry,
            model,
            sampler_cfg,
            config.filter_spec(),
            rng,
            (config.width, config.height),
            config.pixel_size,
        )
        peak = float(gt.values.max() - gt.values.min())
        if peak <= 0:
            peak = 1.0
        report_gen.add(f"img{i:04d}", gt, recon, peak=peak)
        report_fbp.add(f"img{i:04d}", gt, cond, peak=peak)
        if out_dir:
            write_image(recon, os.path.join(out_dir, f"recon_{i:04d}.raw"))
    return {"pocgm": report_gen, "sparse_fbp": report_fbp}


def end_to_end(
    config: RunConfig,
    out_dir: str,
    train_count: int = 200,
    eval_count: int = 20,
    model_path: str | None = None,
) -> dict:
    """Full pipeline: synthesize data, train, reconstruct held-out images, score.

    The held-out split continues the seeded phantom family after the training
    indices, so the two splits never overlap.
    """
    os.makedirs(out_dir, exist_ok=True)
    train_dir = os.path.join(out_dir, "train")
    eval_dir = os.path.join(out_dir, "eval")
    make_dataset(config, train_count, train_dir)
    make_dataset(config, eval_count, eval_dir, offset=train_count)

    if model_path is None:
        model_path = os.path.join(out_dir, "model.npz")
    model, trace = train_from_dataset(
        config, train_dir, model_path, trace_path=os.path.join(out_dir, "loss_trace.csv")
    )

    reports = evaluate_split(config, eval_dir, model, out_dir=os.path.join(out_dir, "recon"))
    reports["pocgm"].write_csv(os.path.join(out_dir, "metrics_pocgm.csv"))
    reports["sparse_fbp"].write_csv(os.path.join(out_dir, "metrics_fbp.csv"))
    summary = {
        "pocgm_psnr": reports["pocgm"].mean_psnr,
        "fbp_psnr": reports["sparse_fbp"].mean_psnr,
        "pocgm_ssim": reports["pocgm"].mean_ssim,
        "fbp_ssim": reports["sparse_fbp"].mean_ssim,
        "model_path": model_path,
        "final_loss": trace[-1][1],
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary
