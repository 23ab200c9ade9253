"""Learning a shared initialization that fine-tunes fast on new images.

First-order scheme: a shared init is copied to every head, each copy takes m
plain gradient steps on its own sub-region, and the init moves along the sum
of post-adaptation gradients (second-order terms through the inner loop are
dropped). One inner step-size schedule is shared by all heads.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (AdamState, ParamSet, adam_step, backward, forward,
                       load_weights, mse_loss, save_weights, ACT_SINE, ACT_RELU)
from .errors import ConfigError, TrainingError
from .models import ModelConfig, build, prepare_inputs
from .partition import PartitionMask, full_mask, grid_for_heads, pog, pos
from .trainer import FitReport, ImageField, predict_partitioned, psnr

log = logging.getLogger(__name__)


@dataclass
class MetaState:
    """Shared init theta0 plus the inner schedule and outer optimizer."""

    theta0: ParamSet
    config: ModelConfig
    m: int
    alpha: np.ndarray            # per-inner-step rates, shared by all heads
    beta: float
    outer_step: int = 0
    train_rule: str = "none"
    adam: AdamState | None = None
    last_batch_loss: float = float("nan")

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if self.m < 1:
            raise ConfigError("inner step count m must be >= 1")
        if self.alpha.shape != (self.m,):
            raise ConfigError(f"alpha schedule must have length m={self.m}")
        if (self.alpha < 0).any():
            raise ConfigError("alpha must be non-negative")
        if self.adam is None:
            self.adam = AdamState.init(self.theta0, lr=self.beta)


@dataclass
class TaskBatch:
    tasks: list[tuple[ImageField, PartitionMask]]

    def __post_init__(self):
        for image, mask in self.tasks:
            if mask.shape != (image.height, image.width):
                raise ConfigError("task mask does not match its image")


def _region_data(image: ImageField, mask: PartitionMask):
    coords = image.coords()
    targets = image.targets_pm1()
    flat = mask.labels.ravel()
    return [(coords[flat == n], targets[flat == n]) for n in range(mask.k)]


def _sgd_steps(theta: ParamSet, config: ModelConfig, xin: np.ndarray,
               tgt: np.ndarray, alpha: np.ndarray) -> tuple[ParamSet, float]:
    """Plain gradient steps on one region; returns adapted params and the
    loss at them."""
    acts = config.activations()
    params = theta.copy()
    for a in alpha:
        pred, tape = forward(params, acts, xin)
        loss, lgrad = mse_loss(pred, tgt)
        if not np.isfinite(loss):
            raise TrainingError("loss diverged during inner adaptation")
        grads = backward(tape, lgrad)
        for (W, b), (gW, gb) in zip(params.layers, grads.layers):
            W -= a * gW
            b -= a * gb
    pred, _ = forward(params, acts, xin, want_tape=False)
    final_loss, _ = mse_loss(pred, tgt)
    if not np.isfinite(final_loss):
        raise TrainingError("adapted weights are non-finite")
    return params, final_loss


def inner_adapt(theta0: ParamSet, config: ModelConfig, image: ImageField,
                mask: PartitionMask, alpha) -> tuple[list[ParamSet], list[float]]:
    """Copy theta0 to every head and adapt each on its own region.

    A k=1 mask gives the plain, unpartitioned inner loop.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    heads, losses = [], []
    for xin_coords, tgt in _region_data(image, mask):
        xin = prepare_inputs(config, xin_coords)
        params, loss = _sgd_steps(theta0, config, xin, tgt, alpha)
        heads.append(params)
        losses.append(loss)
    return heads, losses


def _task_meta_grad(state: MetaState, image: ImageField,
                    mask: PartitionMask) -> tuple[ParamSet, float]:
    """Sum over heads of the region-loss gradient at the adapted weights,
    plus the summed post-adaptation loss."""
    acts = state.config.activations()
    total: ParamSet | None = None
    loss_sum = 0.0
    for xin_coords, tgt in _region_data(image, mask):
        xin = prepare_inputs(state.config, xin_coords)
        adapted, _ = _sgd_steps(state.theta0, state.config, xin, tgt, state.alpha)
        pred, tape = forward(adapted, acts, xin)
        loss, lgrad = mse_loss(pred, tgt)
        loss_sum += loss
        g = backward(tape, lgrad)
        if total is None:
            total = g
        else:
            for (tW, tb), (gW, gb) in zip(total.layers, g.layers):
                tW += gW
                tb += gb
    assert total is not None
    return total, loss_sum


def outer_step(state: MetaState, batch: TaskBatch) -> MetaState:
    """One meta-update: mean task meta-gradient into Adam on theta0.

    Tasks that blow up during adaptation are skipped with a log entry; the
    step aborts if every task is skipped.
    """
    if not batch.tasks:
        raise ConfigError("empty task batch")
    grads: list[ParamSet] = []
    losses: list[float] = []
    for i, (image, mask) in enumerate(batch.tasks):
        try:
            g, loss = _task_meta_grad(state, image, mask)
            grads.append(g)
            losses.append(loss)
        except TrainingError as exc:
            log.warning("outer step %d: task %d skipped (%s)", state.outer_step, i, exc)
    if not grads:
        raise TrainingError("all tasks skipped; outer step aborted",
                            step=state.outer_step)
    state.last_batch_loss = float(np.mean(losses))
    mean = grads[0]
    for g in grads[1:]:
        for (mW, mb), (gW, gb) in zip(mean.layers, g.layers):
            mW += gW
            mb += gb
    inv = 1.0 / len(grads)
    for mW, mb in mean.layers:
        mW *= inv
        mb *= inv
    adam_step(state.theta0, mean, state.adam)
    state.outer_step += 1
    return state


@dataclass
class MetaTrainConfig:
    model: ModelConfig
    rule: str = "none"           # "none" | "pog" | "pos"
    k: int = 1
    m: int = 3
    alpha: float | list[float] = 1e-5
    beta: float = 1e-4
    batch_size: int = 4
    outer_steps: int = 1000
    seed: int = 0
    checkpoint_every: int = 0    # 0 disables periodic checkpoints


def _alpha_schedule(alpha, m: int) -> np.ndarray:
    arr = np.asarray(alpha, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(m, float(arr))
    if arr.shape != (m,):
        raise ConfigError("alpha must be a scalar or one rate per inner step")
    return arr


def masks_for_corpus(corpus: list[ImageField], rule: str, k: int,
                     overseg=None) -> list[PartitionMask]:
    """Precompute the per-image head-selector masks for one partition rule."""
    masks = []
    for image in corpus:
        if rule == "none":
            masks.append(full_mask(image.height, image.width))
        elif rule == "pog":
            grid = grid_for_heads(image.height, image.width, k)
            masks.append(pog(image.height, image.width, grid))
        elif rule == "pos":
            masks.append(pos(image.values, k) if overseg is None
                         else pos(image.values, k, overseg))
        else:
            raise ConfigError(f"unknown partition rule {rule!r}")
    return masks


def meta_train(corpus: list[ImageField], config: MetaTrainConfig,
               checkpoint_dir=None, overseg=None,
               log_rows: list | None = None) -> MetaState:
    """Outer loop over sampled task batches; masks are precomputed per image."""
    if len(corpus) < config.batch_size:
        raise ConfigError(
            f"corpus of {len(corpus)} images is smaller than batch size "
            f"{config.batch_size}")
    k = 1 if config.rule == "none" else config.k
    masks = masks_for_corpus(corpus, config.rule, k, overseg)
    state = MetaState(
        theta0=build(config.model, [config.seed, 0]),
        config=config.model,
        m=config.m,
        alpha=_alpha_schedule(config.alpha, config.m),
        beta=config.beta,
        train_rule=config.rule,
    )
    rng = np.random.default_rng([config.seed, 7])
    t0 = time.perf_counter()
    for it in range(config.outer_steps):
        pick = rng.choice(len(corpus), size=config.batch_size, replace=False)
        batch = TaskBatch([(corpus[i], masks[i]) for i in sorted(pick)])
        outer_step(state, batch)
        if log_rows is not None:
            log_rows.append((state.outer_step, state.last_batch_loss))
        if (config.checkpoint_every and checkpoint_dir is not None
                and (it + 1) % config.checkpoint_every == 0):
            save_meta_state(f"{checkpoint_dir}/meta_{it + 1:06d}", state)
    log.info("meta_train: %d outer steps in %.1fs", config.outer_steps,
             time.perf_counter() - t0)
    return state


def meta_finetune(state: MetaState, image: ImageField, mask: PartitionMask,
                  views: int, alpha=None) -> tuple[list[ParamSet], FitReport]:
    """Adapt the shared init on a new image and report PSNR after each view.

    The mask's rule may differ from the one used at training time. views=0
    reports the raw prediction of the shared init.
    """
    if views < 0:
        raise ConfigError("views must be >= 0")
    sched = state.alpha if alpha is None else _alpha_schedule(alpha, views or 1)
    configs = [state.config] * mask.k
    report = FitReport()
    heads = [state.theta0.copy() for _ in range(mask.k)]
    pred = predict_partitioned(heads, configs, mask, image)
    report.psnr_series.append(psnr(pred, image.values))
    region = _region_data(image, mask)
    xins = [prepare_inputs(state.config, c) for c, _ in region]
    for v in range(views):
        a = sched[v] if v < len(sched) else sched[-1]
        for n in range(mask.k):
            heads[n], _ = _sgd_steps(heads[n], state.config, xins[n],
                                     region[n][1], np.array([a]))
        pred = predict_partitioned(heads, configs, mask, image)
        report.psnr_series.append(psnr(pred, image.values))
    report.steps = views
    report.head_steps = [views] * mask.k
    report.final_psnr = report.psnr_series[-1]
    return heads, report


# --- checkpoints ---------------------------------------------------------------


def save_meta_state(path_base: str, state: MetaState) -> None:
    """Weight binary plus a text sidecar (inner/outer schedule and model shape)."""
    act = ACT_SINE if state.config.arch == "sine" else ACT_RELU
    save_weights(path_base + ".inrw", state.theta0, act, state.config.omega0_first)
    with open(path_base + ".meta.txt", "w") as f:
        f.write(f"m {state.m}\n")
        f.write("alpha " + " ".join(repr(a) for a in state.alpha) + "\n")
        f.write(f"beta {state.beta!r}\n")
        f.write(f"outer_step {state.outer_step}\n")
        f.write(f"train_rule {state.train_rule}\n")
        c = state.config
        f.write(f"arch {c.arch}\n")
        f.write(f"input_dim {c.input_dim}\n")
        f.write(f"output_dim {c.output_dim}\n")
        f.write(f"hidden_features {c.hidden_features}\n")
        f.write(f"hidden_layers {c.hidden_layers}\n")
        f.write(f"omega0_first {c.omega0_first!r}\n")
        f.write(f"omega0_hidden {c.omega0_hidden!r}\n")
        f.write(f"n_harmonics {c.n_harmonics}\n")


def load_meta_state(path_base: str) -> MetaState:
    theta0, _, _ = load_weights(path_base + ".inrw")
    kv: dict[str, str] = {}
    with open(path_base + ".meta.txt") as f:
        for line in f:
            key, _, val = line.strip().partition(" ")
            kv[key] = val
    config = ModelConfig(
        arch=kv["arch"],
        input_dim=int(kv["input_dim"]),
        output_dim=int(kv["output_dim"]),
        hidden_features=int(kv["hidden_features"]),
        hidden_layers=int(kv["hidden_layers"]),
        omega0_first=float(kv["omega0_first"]),
        omega0_hidden=float(kv["omega0_hidden"]),
        n_harmonics=int(kv["n_harmonics"]),
    )
    state = MetaState(
        theta0=theta0,
        config=config,
        m=int(kv["m"]),
        alpha=np.array([float(a) for a in kv["alpha"].split()]),
        beta=float(kv["beta"]),
        outer_step=int(kv["outer_step"]),
        train_rule=kv["train_rule"],
    )
    return state
