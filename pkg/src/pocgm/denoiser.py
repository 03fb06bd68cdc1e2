"""Conditional denoising estimators and the perturbation-matching loss.

Models implement ``evaluate(x_perturbed, sigma, condition) -> estimate`` with
the output shaped like the input.  The trainable model wraps the conv net in
the usual variance-preserving preconditioning

    D(x, sigma, c) = c_skip * x + c_out * F([c_in * x, c, log(sigma)/4])

with c_skip = sd^2/(sigma^2+sd^2), c_out = sigma*sd/sqrt(sigma^2+sd^2),
c_in = 1/sqrt(sigma^2+sd^2), sd = sigma_data, so the network F always sees
unit-scale inputs and learns a unit-scale residual.  The estimator is related
to a direction predictor f by D = x - sigma * f, which is how the analytic
oracle model below is built from the field-line direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .network import TinyNet, TinyNetConfig
from .pfgm import DiracDataset, PfgmConfig, oracle_field_direction, sample_perturbation

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class IntensityTransform:
    """Affine map between intensity units and the model's normalized space."""

    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("transform requires hi > lo")

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.lo) / (self.hi - self.lo)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * (self.hi - self.lo) + self.lo


class DenoiserModel:
    """Interface: estimate the clean signal from a perturbed one."""

    def evaluate(self, x_perturbed: np.ndarray, sigma: float, condition) -> np.ndarray:
        raise NotImplementedError


class IdentityDenoiser(DenoiserModel):
    """Returns the condition; the flow then contracts exactly onto it."""

    def evaluate(self, x_perturbed, sigma, condition):
        cond = np.asarray(condition, dtype=np.float64)
        if cond.shape != np.shape(x_perturbed):
            raise ValueError("condition shape must match the sample shape")
        return cond.copy()


class OracleDenoiser(DenoiserModel):
    """Analytic estimator for a discrete data distribution; ignores the condition.

    evaluate(x, sigma, _) = x - sigma * f(x, sigma*sqrt(D)) with f the
    normalized field-line direction, i.e. the denoiser expression of the flow
    slope dx/dsigma = f; for a single data point this returns that point
    exactly (f collapses to (x - v)/sigma).
    """

    def __init__(self, data: DiracDataset, aug_dim: int):
        self.data = data
        self.aug_dim = aug_dim

    def evaluate(self, x_perturbed, sigma, condition=None):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        x = np.asarray(x_perturbed, dtype=np.float64)
        r = sigma * np.sqrt(self.aug_dim)
        f = oracle_field_direction(x, r, self.data, self.aug_dim)
        return x - sigma * f


def _precond_coeffs(sigma: np.ndarray, sigma_data: float):
    sigma = np.asarray(sigma, dtype=np.float64)
    s2 = sigma**2 + sigma_data**2
    c_skip = sigma_data**2 / s2
    c_out = sigma * sigma_data / np.sqrt(s2)
    c_in = 1.0 / np.sqrt(s2)
    c_noise = np.log(sigma) / 4.0
    return c_skip, c_out, c_in, c_noise


class ConditionalDenoiser(DenoiserModel):
    """Trainable conditional estimator: preconditioned conv net over
    [perturbed image, sparse-view condition, log-sigma channel]."""

    def __init__(
        self,
        net: TinyNet,
        pfgm: PfgmConfig,
        transform: IntensityTransform = IntensityTransform(),
    ):
        self.net = net
        self.pfgm = pfgm
        self.transform = transform

    # -- batched training path ------------------------------------------------

    def forward_batch(
        self, x: np.ndarray, sigmas: np.ndarray, cond: np.ndarray
    ) -> np.ndarray:
        """x, cond: (B, H, W); sigmas: (B,).  Returns estimates (B, H, W)."""
        b, h, w = x.shape
        c_skip, c_out, c_in, c_noise = _precond_coeffs(sigmas, self.pfgm.sigma_data)
        inp = np.stack(
            [
                c_in[:, None, None] * x,
                cond,
                np.broadcast_to(c_noise[:, None, None], (b, h, w)),
            ],
            axis=1,
        )
        f = self.net.forward(inp)[:, 0]
        self._cache = (x, c_skip, c_out)
        return c_skip[:, None, None] * x + c_out[:, None, None] * f

    def backward_batch(self, d_out: np.ndarray) -> dict[str, np.ndarray]:
        """Accumulate parameter gradients for a loss gradient w.r.t. the output."""
        _, _, c_out = self._cache
        self.net.backward((c_out[:, None, None] * d_out)[:, None])
        return self.net.grads()

    # -- single-sample interface ----------------------------------------------

    def evaluate(self, x_perturbed, sigma, condition):
        x = np.asarray(x_perturbed, dtype=np.float64)
        cond = np.asarray(condition, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("conditional denoiser expects a 2D image")
        if cond.shape != x.shape:
            raise ValueError("condition shape must match the sample shape")
        return self.forward_batch(x[None], np.array([sigma]), cond[None])[0]

    def copy(self) -> "ConditionalDenoiser":
        return ConditionalDenoiser(self.net.copy(), self.pfgm, self.transform)


def oracle_model(data: DiracDataset, aug_dim: int) -> OracleDenoiser:
    return OracleDenoiser(data, aug_dim)


def lambda_weight(sigma: float, sigma_data: float, rule: str = "edm") -> float:
    """Noise-scale loss weight; 'edm' is (sigma^2+sd^2)/(sigma*sd)^2, or constant 1."""
    if rule == "constant":
        return 1.0
    if rule == "edm":
        return (sigma**2 + sigma_data**2) / (sigma * sigma_data) ** 2
    raise ValueError(f"unknown weighting rule {rule!r}")


def conditional_loss(
    model: DenoiserModel,
    batch: list[tuple[np.ndarray, np.ndarray]],
    cfg,
    pfgm: PfgmConfig,
    rng: np.random.Generator,
):
    """Perturbation-matching loss over a batch of (clean, condition) pairs.

    Per item: draw sigma from the configured log-normal, perturb the clean
    image with the configured radius mode, and accumulate
    lambda(sigma) * mean((D(x_hat, sigma, cond) - x)^2); the result is the
    batch mean.  Returns (loss, grads) where grads maps parameter names to
    gradient arrays for trainable models and is None otherwise.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    cleans, perturbs, conds, sigmas, weights = [], [], [], [], []
    for x_full, x_sparse in batch:
        x = np.asarray(x_full, dtype=np.float64)
        c = np.asarray(x_sparse, dtype=np.float64)
        if x.shape != c.shape:
            raise ValueError("paired images must share a shape")
        sigma = float(np.exp(cfg.p_mean + cfg.p_std * rng.standard_normal()))
        cleans.append(x)
        perturbs.append(sample_perturbation(x, sigma, pfgm, rng, mode=cfg.radius_mode))
        conds.append(c)
        sigmas.append(sigma)
        weights.append(lambda_weight(sigma, pfgm.sigma_data, cfg.lambda_weighting))

    clean = np.stack(cleans)
    perturbed = np.stack(perturbs)
    cond = np.stack(conds)
    sig = np.asarray(sigmas)
    lam = np.asarray(weights)

    trainable = hasattr(model, "forward_batch")
    if trainable:
        est = model.forward_batch(perturbed, sig, cond)
    else:
        est = np.stack(
            [model.evaluate(perturbed[i], sig[i], cond[i]) for i in range(len(batch))]
        )

    err = est - clean
    per_item = lam * np.mean(err.reshape(len(batch), -1) ** 2, axis=1)
    for i, li in enumerate(per_item):
        if not np.isfinite(li):
            raise FloatingPointError(
                f"non-finite loss for batch item {i} at sigma={sig[i]:.6g}"
            )
    loss = float(np.mean(per_item))

    grads = None
    if trainable:
        n_pix = clean[0].size
        d_out = (2.0 * lam[:, None, None] / (n_pix * len(batch))) * err
        model.net.zero_grads()
        grads = model.backward_batch(d_out)
    return loss, grads


# -- serialization -------------------------------------------------------------


def save_model(model: ConditionalDenoiser, path: str, loss_trace=None) -> None:
    """Write an npz archive: JSON header + named parameter arrays."""
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "arch": model.net.cfg.to_dict(),
        "in_channels": model.net.in_channels,
        "normalization": {"lo": model.transform.lo, "hi": model.transform.hi},
        "pfgm": model.pfgm.to_dict(),
    }
    if loss_trace is not None:
        header["loss_trace"] = [[int(i), float(v)] for i, v in loss_trace]
    arrays = {f"param:{k}": v for k, v in model.net.params().items()}
    np.savez(path, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), **arrays)


def load_model(path: str) -> ConditionalDenoiser:
    with np.load(path) as npz:
        header = json.loads(bytes(npz["header"]).decode())
        if header.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(
                f"unsupported model format version {header.get('format_version')!r}"
            )
        params = {
            k[len("param:") :]: npz[k] for k in npz.files if k.startswith("param:")
        }
    net = TinyNet(
        TinyNetConfig.from_dict(header["arch"]), int(header["in_channels"]), seed=0
    )
    net.set_params(params)
    transform = IntensityTransform(
        float(header["normalization"]["lo"]), float(header["normalization"]["hi"])
    )
    return ConditionalDenoiser(net, PfgmConfig.from_dict(header["pfgm"]), transform)


def load_loss_trace(path: str) -> list[tuple[int, float]]:
    with np.load(path) as npz:
        header = json.loads(bytes(npz["header"]).decode())
    return [(int(i), float(v)) for i, v in header.get("loss_trace", [])]
