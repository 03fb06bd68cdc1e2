"""Small end-to-end run: data synthesis -> training -> conditional sampling.

A reduced version of the full experiment (fewer phantoms and iterations) so
it finishes in a few minutes; expect a modest improvement over the sparse
FBP baseline.  The full-scale experiment lives in the acceptance suite.
"""

import json
import os
import tempfile

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from pocgm import RunConfig, TrainConfig, read_image
from pocgm.pipeline import end_to_end

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

config = RunConfig(
    train=TrainConfig(iterations=800, batch=8, patch=None, learning_rate=1e-3, seed=0),
    base_channels=16,
    depth=2,
    sigma_data=0.3,
    seed=0,
)

workdir = tempfile.mkdtemp(prefix="pocgm_demo_")
print(f"working in {workdir} (train 60 phantoms, evaluate 6)")
summary = end_to_end(config, workdir, train_count=60, eval_count=6)
print(json.dumps({k: v for k, v in summary.items() if isinstance(v, float)}, indent=2))

gt = read_image(os.path.join(workdir, "eval", "gt_0000.raw"))
cond = read_image(os.path.join(workdir, "eval", "fbp_0000.raw"))
recon = read_image(os.path.join(workdir, "recon", "recon_0000.raw"))

fig, axes = plt.subplots(1, 3, figsize=(13, 4))
for ax, (title, img) in zip(
    axes,
    [("ground truth", gt), ("sparse-view FBP (input)", cond), ("conditional flow sample", recon)],
):
    ax.imshow(img.values, cmap="gray", vmin=0, vmax=max(gt.values.max(), 1e-9))
    ax.set_title(title)
    ax.axis("off")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "05_end_to_end.png"), dpi=120)
print("wrote out/05_end_to_end.png")
