"""Acceptance suite: one test per criterion, each printing a PASS line.

Criterion 9 trains the desk-scale conditional model end to end and is the
slow one (several minutes); criterion 10 re-runs the seeded criteria and
demands bit-identical numerics.  Run just this file with
``pytest tests/test_acceptance.py -v -s``.
"""

import json
import os
import time

import mpmath as mp
import numpy as np
import pytest
from scipy import ndimage, stats

from pocgm import (
    ConditionalDenoiser,
    DiracDataset,
    FilterSpec,
    ImageGrid,
    OracleDenoiser,
    PfgmConfig,
    RunConfig,
    SamplerConfig,
    Sinogram,
    TrainConfig,
    backproject,
    build_sigma_schedule,
    desk_scale_geometry,
    disk_phantom,
    fbp_reconstruct,
    oracle_field_direction,
    paper_scale_geometry,
    psnr,
    sample_ode,
    sample_prior,
    sample_views,
    siddon_forward,
    ssim,
    uniform_mask,
)
from pocgm.denoiser import conditional_loss
from pocgm.network import TinyNet, TinyNetConfig
from pocgm.pipeline import end_to_end

# Desk-scale operating point for the end-to-end criterion: 200 training and
# 20 held-out phantoms at 64x64, 60 full / 15 kept views (4:1), D = 128 with
# 16 Heun steps.
E2E_CONFIG = dict(
    width=64,
    height=64,
    pixel_size=6.25,
    detector_count=64,
    detector_pitch=1 / 64,
    fov_radius=200.0,
    full_views=60,
    kept_views=15,
    aug_dim=128,
    steps=16,
    integrator="heun",
    base_channels=16,
    depth=2,
    seed=0,
)
E2E_TRAIN = dict(iterations=4000, batch=16, patch=32, learning_rate=1e-3, seed=0)
E2E_COUNTS = dict(train_count=200, eval_count=20)


def _report(num, passed, detail):
    status = "PASS" if passed else "FAIL"
    print(f"\ncriterion {num}: {status} - {detail}")
    assert passed, f"criterion {num}: {detail}"


# -- 1. projector adjoint -------------------------------------------------------


def test_criterion_01_projector_adjoint():
    t0 = time.time()
    geom = desk_scale_geometry()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        x = ImageGrid(64, 64, 6.25, rng.standard_normal((64, 64)))
        y = rng.standard_normal((60, 64))
        ax = siddon_forward(x, geom).values
        aty = backproject(Sinogram(y, geom), geom, (64, 64), 6.25).values
        rel = abs(float(np.sum(ax * y)) - float(np.sum(x.values * aty)))
        rel /= np.linalg.norm(ax) * np.linalg.norm(y)
        worst = max(worst, rel)
    elapsed = time.time() - t0
    _report(
        1,
        worst <= 1e-6 and elapsed < 10.0,
        f"adjoint worst rel {worst:.2e} (<= 1e-6), {elapsed:.1f}s (< 10s)",
    )


# -- 2. chord-length oracle -----------------------------------------------------


def test_criterion_02_chord_oracle():
    t0 = time.time()
    geom = paper_scale_geometry(num_views=3)
    pixel, radius = 1.5625, 150.0
    img = disk_phantom(256, 256, pixel, radius=radius)
    sino = siddon_forward(img, geom)
    d = geom.source_to_center * np.sin(geom.fan_angles())
    mask = np.abs(d) < 0.9 * radius
    expected = 2.0 * np.sqrt(radius**2 - d[mask] ** 2)
    err = float(np.abs(sino.values[:, mask] - expected[None, :]).max())
    elapsed = time.time() - t0
    _report(
        2,
        err <= 1.5 * pixel and elapsed < 10.0,
        f"max chord error {err:.3f} mm (<= {1.5 * pixel:.3f}), {elapsed:.1f}s (< 10s)",
    )


# -- 3. FBP sanity ---------------------------------------------------------------


def test_criterion_03_fbp_sanity():
    t0 = time.time()
    geom = paper_scale_geometry(num_views=512)
    pixel, radius = 1.5625, 150.0
    img = disk_phantom(256, 256, pixel, radius=radius)
    sino = siddon_forward(img, geom)
    spec = FilterSpec("ram-lak", 1.0)
    full = fbp_reconstruct(sino, geom, (256, 256), pixel, spec)
    sparse = sample_views(sino, uniform_mask(512, 128))
    quarter = fbp_reconstruct(sparse, sparse.geometry, (256, 256), pixel, spec)

    p_full = psnr(img, full, peak=1.0)
    p_sparse = psnr(img, quarter, peak=1.0)
    xs, ys = img.pixel_centers()
    X, Y = np.meshgrid(xs, ys)
    outside = (X**2 + Y**2) > (1.1 * radius) ** 2

    def hf_energy(rec):
        hp = rec.values - ndimage.gaussian_filter(rec.values, 2.0)
        return float(np.sum(hp[outside] ** 2))

    ratio = hf_energy(quarter) / hf_energy(full)
    elapsed = time.time() - t0
    ok = p_full >= 28.0 and p_sparse < p_full and ratio >= 2.0 and elapsed < 60.0
    _report(
        3,
        ok,
        f"full-view PSNR {p_full:.2f} dB (>= 28), 128-view {p_sparse:.2f} dB (lower), "
        f"streak energy x{ratio:.1f} (>= 2), {elapsed:.1f}s (< 60s)",
    )


# -- 4. perturbation-kernel statistics ------------------------------------------


def test_criterion_04_kernel_statistics():
    t0 = time.time()
    from pocgm import sample_perturbation

    cfg = PfgmConfig(data_dim=2, aug_dim=8)
    draws = sample_perturbation(
        np.zeros(2), 1.0, cfg, np.random.default_rng(42), size=100_000
    )
    r2 = np.sum(draws**2, axis=1)
    expected = 8.0 * 2.0 / 6.0  # r^2 N/(D-2) with r^2 = sigma^2 D = 8
    dev_se = abs(r2.mean() - expected) / (r2.std() / np.sqrt(r2.size))

    cfg6 = PfgmConfig(data_dim=2, aug_dim=10**6)
    draws6 = sample_perturbation(
        np.zeros(2), 1.0, cfg6, np.random.default_rng(43), size=100_000
    )
    pvals = [stats.kstest(draws6[:, c], "norm", args=(0.0, 1.0)).pvalue for c in range(2)]
    elapsed = time.time() - t0
    ok = dev_se <= 3.0 and min(pvals) > 0.01 and elapsed < 30.0
    _report(
        4,
        ok,
        f"E[R^2] within {dev_se:.2f} SE (<= 3), KS p = {min(pvals):.3f} (> 0.01), "
        f"{elapsed:.1f}s (< 30s)",
    )


# -- 5. field oracle -------------------------------------------------------------


def test_criterion_05_field_oracle():
    t0 = time.time()
    v = np.array([0.3, -0.7])
    u = np.array([1.4, 2.2])
    single = oracle_field_direction(u, 0.6, DiracDataset(v[None]), 16)
    err_single = float(np.abs(single - np.sqrt(16.0) * (u - v) / 0.6).max())

    sym = oracle_field_direction(
        np.array([0.0, 1.7]), 0.9, DiracDataset(np.array([[2.0, 0.0], [-2.0, 0.0]])), 16
    )
    err_sym = abs(float(sym[0]))

    mp.mp.dps = 50
    rng = np.random.default_rng(7)
    pts = rng.standard_normal((3, 2))
    w = np.array([0.2, 0.5, 0.3])
    uq = rng.standard_normal(2)
    r = 0.8
    num = [mp.mpf(0), mp.mpf(0)]
    den = mp.mpf(0)
    for k in range(3):
        d2 = mp.mpf((uq[0] - pts[k, 0]) ** 2 + (uq[1] - pts[k, 1]) ** 2) + mp.mpf(r) ** 2
        term = mp.mpf(w[k]) * d2 ** (-mp.mpf(18) / 2)
        num[0] += term * (uq[0] - pts[k, 0])
        num[1] += term * (uq[1] - pts[k, 1])
        den += term * r
    brute = np.array([float(mp.sqrt(16) * num[0] / den), float(mp.sqrt(16) * num[1] / den)])
    ours = oracle_field_direction(uq, r, DiracDataset(pts, w), 16)
    err_brute = float(np.abs(ours - brute).max() / np.abs(brute).max())
    elapsed = time.time() - t0
    ok = err_single <= 1e-12 and err_sym <= 1e-12 and err_brute <= 1e-9 and elapsed < 5.0
    _report(
        5,
        ok,
        f"single-charge {err_single:.1e} (<= 1e-12), symmetry {err_sym:.1e} (<= 1e-12), "
        f"brute-force rel {err_brute:.1e} (<= 1e-9), {elapsed:.1f}s (< 5s)",
    )


# -- 6. sampler convergence ------------------------------------------------------


def _heun_endpoint(model, pf, steps, x0):
    sched = build_sigma_schedule(steps, pf)
    x = np.array(x0, dtype=np.float64)
    lv = sched.levels
    for i in range(sched.num_steps):
        s0, s1 = lv[i], lv[i + 1]
        d = (x - model.evaluate(x, s0)) / s0
        xn = x + (s1 - s0) * d
        if s1 > 0:
            d2 = (xn - model.evaluate(xn, s1)) / s1
            xn = x + (s1 - s0) * 0.5 * (d + d2)
        x = xn
    return x


def _criterion_6_runs():
    pf = PfgmConfig(data_dim=2, aug_dim=128, sigma_min=0.002, sigma_max=80.0, rho=7.0)
    v = np.array([0.8, -0.4])
    model = OracleDenoiser(DiracDataset(v[None]), 128)
    cfg = SamplerConfig(steps=16, integrator="heun", pfgm=pf)
    sched = build_sigma_schedule(16, pf)
    endpoint = sample_ode(model, None, sched, cfg, np.random.default_rng(5))
    x0 = sample_prior(pf, np.random.default_rng(5))
    gap = np.linalg.norm(endpoint - v) / np.linalg.norm(x0 - v)

    # Order measurement needs nonzero error: the single-charge flow is
    # integrated exactly (the drift is linear along the path), so the ratio is
    # taken on a two-charge field with curvature spread across the schedule.
    data = DiracDataset(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([0.4, 0.6]))
    model2 = OracleDenoiser(data, 8)
    pf2 = PfgmConfig(data_dim=2, aug_dim=8, sigma_min=0.5, sigma_max=3.0, rho=3.0)
    x0c = np.array([0.4, 1.5])
    ref = _heun_endpoint(model2, pf2, 512, x0c)
    errs = [np.linalg.norm(_heun_endpoint(model2, pf2, k, x0c) - ref) for k in (8, 16, 32)]
    return endpoint, gap, errs


def test_criterion_06_sampler_convergence():
    t0 = time.time()
    _, gap, errs = _criterion_6_runs()
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    elapsed = time.time() - t0
    ok = gap <= 1e-2 and r1 >= 3.0 and r2 >= 3.0 and elapsed < 10.0
    _report(
        6,
        ok,
        f"single-charge endpoint gap {gap:.2e} (<= 1e-2), order ratios {r1:.2f}/{r2:.2f} "
        f"(>= 3), {elapsed:.1f}s (< 10s)",
    )


# -- 7. distribution recovery ----------------------------------------------------


def _criterion_7_endpoints():
    data = DiracDataset(np.array([[1.5, 0.0], [-1.5, 0.0]]), np.array([0.3, 0.7]))
    pf = PfgmConfig(data_dim=2, aug_dim=128, sigma_min=0.002, sigma_max=80.0, rho=7.0)
    cfg = SamplerConfig(steps=16, integrator="heun", pfgm=pf)
    sched = build_sigma_schedule(16, pf)
    model = OracleDenoiser(data, 128)
    return sample_ode(model, None, sched, cfg, np.random.default_rng(11), n_samples=10_000), data


def test_criterion_07_distribution_recovery():
    t0 = time.time()
    ends, data = _criterion_7_endpoints()
    d0 = np.linalg.norm(ends - data.points[0], axis=1)
    d1 = np.linalg.norm(ends - data.points[1], axis=1)
    max_gap = float(np.minimum(d0, d1).max())
    counts = np.array([int(np.sum(d0 < d1)), int(np.sum(d0 >= d1))])
    p = stats.chisquare(counts, np.array([0.3, 0.7]) * 10_000).pvalue
    elapsed = time.time() - t0
    ok = max_gap <= 1e-2 and p > 0.01 and elapsed < 120.0
    _report(
        7,
        ok,
        f"all 10^4 endpoints within {max_gap:.1e} of a charge (<= 1e-2), chi-square "
        f"p = {p:.3f} (> 0.01), counts {counts.tolist()}, {elapsed:.1f}s (< 2min)",
    )


# -- 8. gradient correctness -----------------------------------------------------


def _criterion_8_grads():
    pf = PfgmConfig(data_dim=64, aug_dim=16)
    net = TinyNet(TinyNetConfig(base_channels=4, depth=1, patch=8), 3, seed=1)
    model = ConditionalDenoiser(net, pf)
    rng0 = np.random.default_rng(9)
    batch = [
        (rng0.standard_normal((8, 8)) * 0.3 + 0.5, rng0.standard_normal((8, 8)) * 0.3 + 0.5)
        for _ in range(2)
    ]
    cfg = TrainConfig(iterations=1, batch=2, patch=None)

    def loss_fn():
        return conditional_loss(model, batch, cfg, pf, np.random.default_rng(123))

    _, grads = loss_fn()
    return model, loss_fn, grads


def test_criterion_08_gradient_correctness():
    t0 = time.time()
    model, loss_fn, grads = _criterion_8_grads()
    params = model.net.params()
    names = sorted(params)
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        name = names[int(rng.integers(len(names)))]
        arr = params[name]
        idx = tuple(int(rng.integers(s)) for s in arr.shape)
        h = 1e-6 * max(1.0, abs(arr[idx]))
        orig = arr[idx]
        arr[idx] = orig + h
        lp, _ = loss_fn()
        arr[idx] = orig - h
        lm, _ = loss_fn()
        arr[idx] = orig
        fd = (lp - lm) / (2.0 * h)
        an = grads[name][idx]
        worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-8))
    elapsed = time.time() - t0
    ok = worst <= 1e-4 and elapsed < 30.0
    _report(
        8,
        ok,
        f"worst rel error over 100 probes {worst:.2e} (<= 1e-4), {elapsed:.1f}s (< 30s)",
    )


# -- 9. end-to-end desk-scale reconstruction -------------------------------------


def _e2e_config():
    return RunConfig(train=TrainConfig(**E2E_TRAIN), **E2E_CONFIG)


@pytest.fixture(scope="module")
def e2e_summary(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("e2e_run"))
    t0 = time.time()
    summary = end_to_end(_e2e_config(), out, **E2E_COUNTS)
    summary["elapsed_minutes"] = (time.time() - t0) / 60.0
    summary["out_dir"] = out
    return summary


def test_criterion_09_end_to_end(e2e_summary):
    s = e2e_summary
    gain = s["pocgm_psnr"] - s["fbp_psnr"]
    ok = (
        gain >= 2.0
        and s["pocgm_ssim"] > s["fbp_ssim"]
        and s["elapsed_minutes"] <= 60.0
        and E2E_TRAIN["iterations"] <= 20_000
    )
    _report(
        9,
        ok,
        f"PSNR {s['pocgm_psnr']:.2f} vs FBP {s['fbp_psnr']:.2f} dB (gain {gain:+.2f}, "
        f"need >= +2), SSIM {s['pocgm_ssim']:.4f} vs {s['fbp_ssim']:.4f}, "
        f"{s['elapsed_minutes']:.1f} min (<= 60)",
    )


# -- 10. determinism -------------------------------------------------------------


def test_criterion_10_determinism(e2e_summary, tmp_path_factory):
    # criteria 6-8: rerun the seeded computations and demand bit equality
    end_a, _, errs_a = _criterion_6_runs()
    end_b, _, errs_b = _criterion_6_runs()
    det6 = np.array_equal(end_a, end_b) and errs_a == errs_b

    ends_a, _ = _criterion_7_endpoints()
    ends_b, _ = _criterion_7_endpoints()
    det7 = np.array_equal(ends_a, ends_b)

    _, _, grads_a = _criterion_8_grads()
    _, _, grads_b = _criterion_8_grads()
    det8 = all(np.array_equal(grads_a[k], grads_b[k]) for k in grads_a)

    # criterion 9: rerun the full pipeline with the same seed; every numeric
    # artifact (raw images, sinograms, metrics, loss trace) must hash equal.
    # Model parameters are compared by content (the npz container embeds
    # timestamps).
    out_b = str(tmp_path_factory.mktemp("e2e_rerun"))
    summary_b = end_to_end(_e2e_config(), out_b, **E2E_COUNTS)
    det9 = summary_b["pocgm_psnr"] == e2e_summary["pocgm_psnr"]
    det9 &= summary_b["pocgm_ssim"] == e2e_summary["pocgm_ssim"]

    import hashlib

    def digest(path):
        return hashlib.sha256(open(path, "rb").read()).hexdigest()

    out_a = e2e_summary["out_dir"]
    for rel in ["metrics_pocgm.csv", "metrics_fbp.csv", "loss_trace.csv"] + [
        f"recon/recon_{i:04d}.raw" for i in range(E2E_COUNTS["eval_count"])
    ]:
        det9 &= digest(os.path.join(out_a, rel)) == digest(os.path.join(out_b, rel))

    with np.load(os.path.join(out_a, "model.npz")) as ma, np.load(
        os.path.join(out_b, "model.npz")
    ) as mb:
        det9 &= all(
            np.array_equal(ma[k], mb[k]) for k in ma.files if k.startswith("param:")
        )

    ok = det6 and det7 and det8 and det9
    _report(
        10,
        ok,
        f"bit-identical reruns: criterion6={det6}, criterion7={det7}, "
        f"criterion8={det8}, criterion9={det9}",
    )
