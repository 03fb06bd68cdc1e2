"""Training loop for the conditional denoiser: Adam on random patches, with EMA."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .denoiser import ConditionalDenoiser, conditional_loss
from .pfgm import RADIUS_MODES, PfgmConfig

DIVERGENCE_LIMIT = 1e6


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, trace: list[tuple[int, float]]):
        super().__init__(message)
        self.trace = trace


@dataclass
class TrainConfig:
    iterations: int = 2000
    batch: int = 16
    learning_rate: float = 2e-4
    ema_decay: float = 0.999
    p_mean: float = -1.2  # log-normal sigma sampling: sigma = exp(p_mean + p_std * z)
    p_std: float = 1.2
    lambda_weighting: str = "edm"  # or "constant"
    radius_mode: str = "exact-radial"
    patch: int | None = 32  # None trains on whole images
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must be in [0, 1)")
        if self.lambda_weighting not in ("edm", "constant"):
            raise ValueError(f"unknown lambda_weighting {self.lambda_weighting!r}")
        if self.radius_mode not in RADIUS_MODES:
            raise ValueError(f"unknown radius_mode {self.radius_mode!r}")

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "batch": self.batch,
            "learning_rate": self.learning_rate,
            "ema_decay": self.ema_decay,
            "p_mean": self.p_mean,
            "p_std": self.p_std,
            "lambda_weighting": self.lambda_weighting,
            "radius_mode": self.radius_mode,
            "patch": self.patch,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        out = cls(**{k: d[k] for k in d})
        return out


class Adam:
    """Per-parameter adaptive-moment updates, applied in place."""

    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.params = params
        self.lr = cfg.learning_rate
        self.b1 = cfg.adam_beta1
        self.b2 = cfg.adam_beta2
        self.eps = cfg.adam_eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            p -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


def _crop_pair(
    x: np.ndarray, c: np.ndarray, patch: int | None, rng: np.random.Generator
):
    if patch is None or (x.shape[0] <= patch and x.shape[1] <= patch):
        return x, c
    i = int(rng.integers(0, x.shape[0] - patch + 1))
    j = int(rng.integers(0, x.shape[1] - patch + 1))
    return x[i : i + patch, j : j + patch], c[i : i + patch, j : j + patch]


def train(
    model: ConditionalDenoiser,
    dataset: list[tuple[np.ndarray, np.ndarray]],
    cfg: TrainConfig,
    pfgm: PfgmConfig,
):
    """Optimize the model in place; returns (ema_model, loss_trace).

    ``dataset`` holds (clean, condition) pairs already mapped to the model's
    normalized intensity space.  The returned model carries the EMA parameters
    (decay cfg.ema_decay); the trace lists (iteration, loss) per step and is
    reproducible for a fixed seed.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    params = model.net.params()
    opt = Adam(params, cfg)
    ema = {k: v.copy() for k, v in params.items()}
    trace: list[tuple[int, float]] = []

    for it in range(cfg.iterations):
        idx = rng.integers(0, len(dataset), size=cfg.batch)
        batch = []
        for i in idx:
            x, c = dataset[int(i)]
            batch.append(_crop_pair(np.asarray(x), np.asarray(c), cfg.patch, rng))
        loss, grads = conditional_loss(model, batch, cfg, pfgm, rng)
        trace.append((it, loss))
        if loss > DIVERGENCE_LIMIT:
            raise TrainingDiverged(
                f"loss {loss:.3g} exceeded {DIVERGENCE_LIMIT:.0e} at iteration {it}",
                trace,
            )
        opt.step(grads)
        for k, p in params.items():
            ema[k] = cfg.ema_decay * ema[k] + (1.0 - cfg.ema_decay) * p

    ema_model = model.copy()
    ema_model.net.set_params(ema)
    return ema_model, trace


def write_loss_trace(trace: list[tuple[int, float]], path: str) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,loss\n")
        for it, loss in trace:
            fh.write(f"{it},{loss:.10g}\n")
