"""The augmented-flow machinery in two dimensions.

Shows the heavy-tailed perturbation kernel against its Gaussian limit, the
analytic field-line directions around two weighted charges, and a bundle of
sampling trajectories flowing from the prior onto the charges.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pocgm import (
    DiracDataset,
    OracleDenoiser,
    PfgmConfig,
    build_sigma_schedule,
    oracle_field_direction,
    sample_perturbation,
)

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)
rng = np.random.default_rng(0)

# Radial law: R = r * sqrt(beta/(1-beta)) with beta ~ Beta(N/2, D/2).  Small D
# gives heavy tails; D -> infinity with r = sigma*sqrt(D) recovers a Gaussian.
fig, ax = plt.subplots(figsize=(7, 4))
for aug_dim, style in [(4, "C0"), (32, "C1"), (10**6, "C2")]:
    cfg = PfgmConfig(data_dim=2, aug_dim=aug_dim)
    draws = sample_perturbation(np.zeros(2), 1.0, cfg, rng, size=40_000)
    radii = np.linalg.norm(draws, axis=1)
    ax.hist(radii, bins=np.linspace(0, 6, 120), density=True, histtype="step",
            color=style, label=f"D = {aug_dim}")
ax.set_xlabel("perturbation radius at sigma = 1")
ax.set_ylabel("density")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "03_kernel_radii.png"), dpi=120)
print("wrote out/03_kernel_radii.png")

# Field-line directions around two charges, and sampled trajectories.
data = DiracDataset(np.array([[1.5, 0.0], [-1.5, 0.0]]), np.array([0.3, 0.7]))
aug = 128
grid = np.linspace(-4, 4, 25)
X, Y = np.meshgrid(grid, grid)
pts = np.stack([X.ravel(), Y.ravel()], axis=1)
f = oracle_field_direction(pts, 1.0 * np.sqrt(aug), data, aug)
f /= np.linalg.norm(f, axis=1, keepdims=True) + 1e-12

fig, ax = plt.subplots(figsize=(6, 6))
ax.quiver(pts[:, 0], pts[:, 1], -f[:, 0], -f[:, 1], angles="xy", scale=35,
          width=0.0025, color="gray")

model = OracleDenoiser(data, aug)
pf = PfgmConfig(data_dim=2, aug_dim=aug, sigma_min=0.002, sigma_max=10.0, rho=7.0)
sched = build_sigma_schedule(24, pf)
for k in range(40):
    traj_rng = np.random.default_rng(1000 + k)
    from pocgm import sample_prior

    x = sample_prior(pf, traj_rng)
    path = [x.copy()]
    lv = sched.levels
    for i in range(sched.num_steps):
        s0, s1 = lv[i], lv[i + 1]
        d = (x - model.evaluate(x, s0)) / s0
        xn = x + (s1 - s0) * d
        if s1 > 0:
            d2 = (xn - model.evaluate(xn, s1)) / s1
            xn = x + (s1 - s0) * 0.5 * (d + d2)
        x = xn
        path.append(x.copy())
    path = np.array(path)
    ax.plot(path[:, 0], path[:, 1], lw=0.6, alpha=0.6, color="C0")
ax.scatter(data.points[:, 0], data.points[:, 1], s=120 * data.weights + 30,
           color="C3", zorder=5, label="charges (area ~ weight)")
ax.set_xlim(-4, 4)
ax.set_ylim(-4, 4)
ax.set_title("reverse flow onto a two-charge distribution")
ax.legend(loc="lower right")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "03_field_trajectories.png"), dpi=120)
print("wrote out/03_field_trajectories.png")
