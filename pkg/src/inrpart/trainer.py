"""Fit coordinate MLPs to images, singly or as a masked ensemble of heads.

Targets are normalized to [-1, 1] for training; PSNR/SSIM are computed after
mapping predictions back to [0, 1]. Loss is mean squared error by default
(resolution-independent learning rates); pass loss_mode="sum" for the plain
sum of squares.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .autodiff import AdamState, ParamSet, adam_step, backward, forward, mse_loss
from .errors import ConfigError, InputError, TrainingError
from .models import ModelConfig, build, prepare_inputs
from .partition import PartitionMask, full_mask


@dataclass
class ImageField:
    """Pixel grid with values in [0, 1] and coordinates normalized to [-1, 1]^2
    (x along width, y along height)."""

    values: np.ndarray   # [H, W, c] float64

    def __post_init__(self):
        v = self.values
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3 or v.shape[2] not in (1, 3):
            raise InputError(f"expected [H, W, c] with c in {{1, 3}}, got {v.shape}")
        if not np.isfinite(v).all() or v.min() < 0.0 or v.max() > 1.0:
            raise InputError("image values must be finite and in [0, 1]")
        self.values = np.ascontiguousarray(v, dtype=np.float64)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def coords(self) -> np.ndarray:
        """Row-major [H*W, 2] grid of (x, y) in [-1, 1]."""
        h, w = self.height, self.width
        xs = np.linspace(-1.0, 1.0, w) if w > 1 else np.zeros(1)
        ys = np.linspace(-1.0, 1.0, h) if h > 1 else np.zeros(1)
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def targets_pm1(self) -> np.ndarray:
        """Training targets in [-1, 1], shape [H*W, c]."""
        return 2.0 * self.values.reshape(-1, self.channels) - 1.0

    def gray(self) -> np.ndarray:
        """[H, W] channel average."""
        return self.values.mean(axis=2)


@dataclass
class FitReport:
    loss: list[float] = field(default_factory=list)
    psnr_series: list[float] = field(default_factory=list)
    steps: int = 0
    seconds: float = 0.0
    final_psnr: float = 0.0
    final_ssim: float = 0.0
    head_steps: list[int] = field(default_factory=list)
    pixel_passes: int = 0


def psnr(pred: np.ndarray, target: np.ndarray) -> float:
    """10*log10(1/MSE) for [0, 1] images; identical images give +inf."""
    if pred.shape != target.shape:
        raise InputError(f"shape mismatch {pred.shape} vs {target.shape}")
    mse = float(np.mean((np.asarray(pred, float) - np.asarray(target, float)) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


PSNR_CSV_CAP = 99.0


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(pred: np.ndarray, target: np.ndarray) -> float:
    """Structural similarity with an 11x11 Gaussian window (sigma 1.5),
    K1=0.01, K2=0.03 on unit dynamic range; windows fully inside the image,
    channels averaged."""
    if pred.shape != target.shape:
        raise InputError(f"shape mismatch {pred.shape} vs {target.shape}")
    x = np.asarray(pred, float)
    y = np.asarray(target, float)
    if x.ndim == 2:
        x = x[:, :, None]
        y = y[:, :, None]
    h, w, c = x.shape
    size = 11
    if h < size or w < size:
        raise InputError(f"image {h}x{w} smaller than the {size}x{size} SSIM window")
    win = _gaussian_window(size)
    pad = size // 2
    c1, c2 = (0.01 * 1.0) ** 2, (0.03 * 1.0) ** 2

    def wfilter(a):
        out = ndimage.correlate(a, win, mode="constant")
        return out[pad:h - pad, pad:w - pad]

    vals = []
    for ch in range(c):
        a, b = x[:, :, ch], y[:, :, ch]
        mu_a, mu_b = wfilter(a), wfilter(b)
        s_aa = wfilter(a * a) - mu_a * mu_a
        s_bb = wfilter(b * b) - mu_b * mu_b
        s_ab = wfilter(a * b) - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * s_ab + c2)
        den = (mu_a ** 2 + mu_b ** 2 + c1) * (s_aa + s_bb + c2)
        vals.append(float(np.mean(num / den)))
    return float(np.mean(vals))


def _local_coords(coords: np.ndarray) -> np.ndarray:
    """Renormalize a coordinate subset to fill [-1, 1] per axis."""
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return 2.0 * (coords - lo) / span - 1.0


def _fit_head(config: ModelConfig, coords: np.ndarray, targets: np.ndarray,
              steps: int, lr: float, seed_key: list[int],
              sample_px: int | None = None, loss_mode: str = "mean",
              early_stop: tuple[int, float] | None = None):
    """Train one head; returns (net, per-step loss, per-step SSE in [0,1] space,
    pixel passes, steps actually run)."""
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    if config.local_coords:
        coords = _local_coords(coords)
    net = build(config, seed_key)
    state = AdamState.init(net, lr=lr)
    rng = np.random.default_rng(seed_key + [1]) if sample_px else None

    inputs_full = prepare_inputs(config, coords)
    n_px = coords.shape[0]
    losses: list[float] = []
    sses: list[float] = []
    pixel_passes = 0
    best = -np.inf
    stale = 0
    for step in range(steps):
        if sample_px and sample_px < n_px:
            pick = rng.choice(n_px, size=sample_px, replace=False)
            xin, tgt = inputs_full[pick], targets[pick]
        else:
            xin, tgt = inputs_full, targets
        pred, tape = forward(net, config.activations(), xin)
        loss, lgrad = mse_loss(pred, tgt, mode=loss_mode)
        if not np.isfinite(loss):
            raise TrainingError(f"loss diverged at step {step}", step=step)
        grads = backward(tape, lgrad)
        adam_step(net, grads, state)
        pixel_passes += xin.shape[0]
        losses.append(loss)
        pred01 = np.clip((pred + 1.0) / 2.0, 0.0, 1.0)
        tgt01 = (tgt + 1.0) / 2.0
        sse = float(((pred01 - tgt01) ** 2).sum())
        sses.append(sse)
        if early_stop is not None:
            cur = -10.0 * np.log10(max(sse / tgt.size, 1e-30))
            if cur > best + early_stop[1]:
                best, stale = cur, 0
            else:
                stale += 1
                if stale >= early_stop[0]:
                    break
    return net, losses, sses, pixel_passes, len(losses)


def predict_head(net: ParamSet, config: ModelConfig, coords: np.ndarray) -> np.ndarray:
    """[n, c] prediction mapped back to [0, 1]."""
    if config.local_coords:
        coords = _local_coords(coords)
    out, _ = forward(net, config.activations(), prepare_inputs(config, coords),
                     want_tape=False)
    return np.clip((out + 1.0) / 2.0, 0.0, 1.0)


def predict_partitioned(heads: list[ParamSet], configs: list[ModelConfig],
                        mask: PartitionMask, image_like: ImageField) -> np.ndarray:
    """Compose per-head predictions; each pixel goes through exactly one head."""
    coords = image_like.coords()
    flat_labels = mask.labels.ravel()
    out = np.empty((coords.shape[0], configs[0].output_dim))
    for n, (net, cfg) in enumerate(zip(heads, configs)):
        sel = flat_labels == n
        out[sel] = predict_head(net, cfg, coords[sel])
    return out.reshape(image_like.height, image_like.width, configs[0].output_dim)


def _as_config_list(config, k: int) -> list[ModelConfig]:
    configs = list(config) if isinstance(config, (list, tuple)) else [config] * k
    if len(configs) != k:
        raise ConfigError(f"{len(configs)} head configs for k={k} heads")
    if len({c.output_dim for c in configs}) != 1:
        raise ConfigError("heads must share an output dim")
    return configs


def fit_partitioned(image: ImageField, mask: PartitionMask, config,
                    steps: int, lr: float, seed: int,
                    loss_mode: str = "mean", threads: int = 1,
                    early_stop: tuple[int, float] | None = None,
                    ) -> tuple[list[ParamSet], FitReport]:
    """Train one head per mask label on exactly its own pixels.

    Heads are independent jobs (optionally run on a thread pool); results are
    reduced in head order so the outcome is schedule-independent.
    """
    if mask.shape != (image.height, image.width):
        raise ConfigError(
            f"mask {mask.shape} does not match image {(image.height, image.width)}")
    mask.validate()
    configs = _as_config_list(config, mask.k)
    if configs[0].output_dim != image.channels:
        raise ConfigError(
            f"model outputs {configs[0].output_dim} channels, image has {image.channels}")

    coords = image.coords()
    targets = image.targets_pm1()
    flat_labels = mask.labels.ravel()
    regions = [np.flatnonzero(flat_labels == n) for n in range(mask.k)]

    def job(n: int):
        return _fit_head(configs[n], coords[regions[n]], targets[regions[n]],
                         steps, lr, [seed, n], loss_mode=loss_mode,
                         early_stop=early_stop)

    t0 = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(mask.k)))
    else:
        results = [job(n) for n in range(mask.k)]
    seconds = time.perf_counter() - t0

    heads = [r[0] for r in results]
    report = _aggregate_report(image, results, loss_mode, seconds)
    pred = predict_partitioned(heads, configs, mask, image)
    report.final_psnr = psnr(pred, image.values)
    report.final_ssim = ssim(pred, image.values)
    return heads, report


def fit_single(image: ImageField, config: ModelConfig, steps: int, lr: float,
               seed: int, sample_px: int | None = None, loss_mode: str = "mean",
               early_stop: tuple[int, float] | None = None,
               ) -> tuple[ParamSet, FitReport]:
    """Train a single network on the whole image (full batch unless sample_px
    asks for randomly sampled pixels per step)."""
    if config.output_dim != image.channels:
        raise ConfigError(
            f"model outputs {config.output_dim} channels, image has {image.channels}")
    coords = image.coords()
    targets = image.targets_pm1()
    t0 = time.perf_counter()
    result = _fit_head(config, coords, targets, steps, lr, [seed, 0],
                       sample_px=sample_px, loss_mode=loss_mode,
                       early_stop=early_stop)
    seconds = time.perf_counter() - t0
    net = result[0]
    report = _aggregate_report(image, [result], loss_mode, seconds)
    pred01 = predict_head(net, config, coords).reshape(image.values.shape)
    report.final_psnr = psnr(pred01, image.values)
    report.final_ssim = ssim(pred01, image.values)
    return net, report


def _aggregate_report(image: ImageField, results, loss_mode: str,
                      seconds: float) -> FitReport:
    """Combine per-head series: global loss and PSNR per step from region SSEs."""
    c = image.channels
    n_steps = max(r[4] for r in results)

    def padded(series, ran):
        # a head that early-stopped holds its last value in the global series
        return np.array(series + [series[-1]] * (n_steps - ran))

    batch_px = np.array([r[3] / r[4] for r in results])  # px per step per head
    loss_num = np.zeros(n_steps)
    sse = np.zeros(n_steps)
    for (_, loss_series, sse_series, _, ran), px in zip(results, batch_px):
        loss_num += padded(loss_series, ran) * (px if loss_mode == "mean" else 1.0)
        sse += padded(sse_series, ran)

    report = FitReport()
    report.loss = list(loss_num / batch_px.sum() if loss_mode == "mean" else loss_num)
    mse01 = sse / (batch_px.sum() * c)
    with np.errstate(divide="ignore"):
        report.psnr_series = [
            float("inf") if m == 0.0 else float(10.0 * np.log10(1.0 / m))
            for m in mse01
        ]
    report.steps = n_steps
    report.seconds = seconds
    report.head_steps = [r[4] for r in results]
    report.pixel_passes = int(sum(r[3] for r in results))
    return report


def fit_single_mask_equivalent(image: ImageField, config: ModelConfig,
                               steps: int, lr: float, seed: int,
                               **kw) -> tuple[list[ParamSet], FitReport]:
    """fit_partitioned with the trivial k=1 mask (degenerate-partition path)."""
    return fit_partitioned(image, full_mask(image.height, image.width),
                           config, steps, lr, seed, **kw)
