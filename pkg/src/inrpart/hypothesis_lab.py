"""Convergence-vs-boundary-count experiments on synthetic piecewise signals.

Signals take values in {-1, +1} and flip exactly at their boundaries. A small
sinusoidal net is trained until test MSE drops below a threshold; the number
of epochs, swept over boundary counts, is fitted with steps ~ p^N. Companion
checkers verify the partition-complexity inequality sum_i p^(N_i) < p^N
numerically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .autodiff import AdamState, adam_step, backward, forward, mse_loss
from .errors import ConfigError
from .models import ModelConfig, build
from .partition import close_factors

N_POINTS_1D = 5000
GRID_2D = 256


@dataclass(frozen=True)
class SignalSpec:
    """Synthetic signal description; 1D uses n_boundaries, 2D uses (n1, n2)."""

    dim: int
    n_boundaries: int = 0        # 1D
    n1: int = 0                  # 2D per-axis counts
    n2: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        if self.dim == 1 and self.n_boundaries < 0:
            raise ConfigError("n_boundaries must be >= 0")
        if self.dim == 2 and (self.n1 < 1 or self.n2 < 1):
            raise ConfigError("2D specs need n1, n2 >= 1")

    @property
    def total_boundaries(self) -> int:
        if self.dim == 1:
            return self.n_boundaries
        return 2 * self.n1 * self.n2 + self.n1 + self.n2


@dataclass
class SignalData:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    boundaries: tuple[np.ndarray, ...]
    shared_train_test: bool = False


def _sample_boundaries(rng, count: int, min_sep: float) -> np.ndarray:
    """Sorted distinct positions strictly inside (-1, 1), pairwise separated
    by more than min_sep (also kept min_sep away from the domain ends so every
    segment contains test points)."""
    picked: list[float] = []
    attempts = 0
    while len(picked) < count:
        x = rng.uniform(-1.0 + min_sep, 1.0 - min_sep)
        if all(abs(x - q) > min_sep for q in picked):
            picked.append(x)
        attempts += 1
        if attempts > 1000 * max(count, 1):
            raise ConfigError(f"cannot place {count} boundaries {min_sep} apart")
    return np.sort(np.array(picked))


def _labels_from_boundaries(x: np.ndarray, boundaries: np.ndarray) -> np.ndarray:
    """+1 on the leftmost segment, flipping at every boundary."""
    crossings = np.searchsorted(boundaries, x)
    return np.where(crossings % 2 == 0, 1.0, -1.0)


def gen_signal(spec: SignalSpec) -> SignalData:
    """1D: 5000 random train points and 5000 uniform test points.
    2D: the uniform 256x256 grid serves as both train and test set."""
    rng = np.random.default_rng([spec.seed, 0])
    if spec.dim == 1:
        # separation slightly above the uniform test spacing so every segment
        # (and hence every flip) is visible in both point sets
        min_sep = 1.05 * 2.0 / (N_POINTS_1D - 1)
        bounds = _sample_boundaries(rng, spec.n_boundaries, min_sep)
        train_x = rng.uniform(-1.0, 1.0, size=(N_POINTS_1D, 1))
        test_x = np.linspace(-1.0, 1.0, N_POINTS_1D)[:, None]
        train_y = _labels_from_boundaries(train_x[:, 0], bounds)[:, None]
        test_y = _labels_from_boundaries(test_x[:, 0], bounds)[:, None]
        return SignalData(train_x, train_y, test_x, test_y, (bounds,))

    min_sep = 1.05 * 2.0 / (GRID_2D - 1)
    bx = _sample_boundaries(rng, spec.n1, min_sep)
    by = _sample_boundaries(rng, spec.n2, min_sep)
    axis = np.linspace(-1.0, 1.0, GRID_2D)
    gx, gy = np.meshgrid(axis, axis)
    coords = np.stack([gx.ravel(), gy.ravel()], axis=1)
    flips = (np.searchsorted(bx, coords[:, 0]) + np.searchsorted(by, coords[:, 1]))
    labels = np.where(flips % 2 == 0, 1.0, -1.0)[:, None]
    return SignalData(coords, labels, coords, labels, (bx, by),
                      shared_train_test=True)


def default_model(dim: int) -> ModelConfig:
    """32-feature, 3-hidden-layer sinusoidal net; first-layer omega 10 in 1D
    and 30 in 2D, hidden omega 30."""
    return ModelConfig(arch="sine", input_dim=dim, output_dim=1,
                       hidden_features=32, hidden_layers=3,
                       omega0_first=10.0 if dim == 1 else 30.0,
                       omega0_hidden=30.0)


@dataclass
class ConvergenceResult:
    steps: int | None            # None when censored
    censored: bool
    diverged: bool
    final_mse: float

    @property
    def value(self) -> int | None:
        return self.steps


def measure_convergence(spec: SignalSpec, model: ModelConfig | None = None,
                        lr: float = 1e-3, threshold: float = 0.05,
                        cap: int = 50000) -> ConvergenceResult:
    """Epochs of full-batch Adam until test MSE < threshold (censored at cap)."""
    if threshold <= 0:
        raise ConfigError("threshold must be positive")
    if cap < 1:
        raise ConfigError("cap must be >= 1")
    data = gen_signal(spec)
    config = model if model is not None else default_model(spec.dim)
    net = build(config, [spec.seed, 1])
    state = AdamState.init(net, lr=lr)
    acts = config.activations()
    mse = math.inf
    for epoch in range(1, cap + 1):
        pred, tape = forward(net, acts, data.train_x)
        loss, lgrad = mse_loss(pred, data.train_y)
        if not np.isfinite(loss):
            return ConvergenceResult(None, True, True, float("nan"))
        grads = backward(tape, lgrad)
        adam_step(net, grads, state)
        test_pred, _ = forward(net, acts, data.test_x, want_tape=False)
        mse = float(np.mean((test_pred - data.test_y) ** 2))
        if not np.isfinite(mse):
            return ConvergenceResult(None, True, True, mse)
        if mse < threshold:
            return ConvergenceResult(epoch, False, False, mse)
    return ConvergenceResult(None, True, False, mse)


@dataclass
class HypothesisReport:
    """Sweep outcome: raw (N, seed, steps) cells plus the fitted exponent."""

    dim: int
    rows: list[tuple[int, int, int | None, bool]] = field(default_factory=list)
    p: float = float("nan")
    r2: float = float("nan")
    spearman: float = float("nan")
    per_n: dict[int, tuple[float, float]] = field(default_factory=dict)

    def uncensored(self) -> list[tuple[int, int]]:
        return [(n, s) for n, _, s, cens in self.rows if not cens and s is not None]

    def summary(self) -> str:
        return (f"dim={self.dim} p={self.p:.5f} r2={self.r2:.4f} "
                f"spearman={self.spearman:.3f} cells={len(self.rows)} "
                f"censored={sum(1 for r in self.rows if r[3])}")


def fit_exponent(points: list[tuple[int, float]]) -> tuple[float, float]:
    """Least squares of log(steps) against N; returns (p = exp(slope), R^2)."""
    if len(points) < 3:
        raise ConfigError("need at least 3 uncensored points")
    ns = np.array([float(n) for n, _ in points])
    steps = np.array([float(s) for _, s in points])
    if len(np.unique(ns)) < 3:
        raise ConfigError("need at least 3 distinct boundary counts")
    if (steps <= 0).any():
        raise ConfigError("step counts must be positive")
    logs = np.log(steps)
    slope, intercept = np.polyfit(ns, logs, 1)
    fitted = slope * ns + intercept
    ss_res = float(np.sum((logs - fitted) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(np.exp(slope)), r2


DESK_SWEEP_1D = dict(n_values=(1, 5, 10, 20, 30, 40), n_seeds=3, cap=20000)
PAPER_SWEEP_1D = dict(n_values=tuple(range(1, 71, 5)), n_seeds=5, cap=50000)
DESK_SWEEP_2D = dict(m_values=(12, 20, 30, 42, 56), n_seeds=2, cap=20000)


def run_sweep(dim: int, n_values=None, m_values=None, n_seeds: int = 3,
              lr: float = 1e-3, threshold: float = 0.05, cap: int = 20000,
              model: ModelConfig | None = None, base_seed: int = 0,
              progress=None) -> HypothesisReport:
    """Measure convergence for each (N, seed) cell and fit the exponent.

    1D sweeps take boundary counts directly; 2D sweeps take products M and
    split them into the closest factor pair (N1, N2).
    """
    report = HypothesisReport(dim=dim)
    if dim == 1:
        if not n_values:
            raise ConfigError("1D sweep needs n_values")
        specs = [(n, SignalSpec(dim=1, n_boundaries=n, seed=base_seed + s), s)
                 for n in n_values for s in range(n_seeds)]
    else:
        if not m_values:
            raise ConfigError("2D sweep needs m_values")
        specs = []
        for m in m_values:
            n1, n2 = close_factors(m)
            s0 = SignalSpec(dim=2, n1=n1, n2=n2, seed=0)
            for s in range(n_seeds):
                spec = SignalSpec(dim=2, n1=n1, n2=n2, seed=base_seed + s)
                specs.append((s0.total_boundaries, spec, s))

    for n, spec, s in specs:
        res = measure_convergence(spec, model=model, lr=lr,
                                  threshold=threshold, cap=cap)
        report.rows.append((n, s, res.steps, res.censored))
        if progress:
            progress(n, s, res)

    good = report.uncensored()
    if len(good) >= 3 and len({n for n, _ in good}) >= 3:
        report.p, report.r2 = fit_exponent([(n, float(s)) for n, s in good])
    by_n: dict[int, list[int]] = {}
    for n, s in good:
        by_n.setdefault(n, []).append(s)
    report.per_n = {n: (float(np.mean(v)), float(np.std(v)))
                    for n, v in sorted(by_n.items())}
    if len(report.per_n) >= 2:
        ns = list(report.per_n)
        means = [report.per_n[n][0] for n in ns]
        report.spearman = float(stats.spearmanr(ns, means).statistic)
    return report


def write_sweep_csv(path, report: HypothesisReport) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["dim", "N", "seed", "steps", "censored"])
        for n, s, steps, cens in report.rows:
            w.writerow([report.dim, n, s, "" if steps is None else steps,
                        int(cens)])


def write_fit_csv(path, report: HypothesisReport) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["dim", "p", "r2", "spearman"])
        w.writerow([report.dim, report.p, report.r2, report.spearman])


# --- partition-complexity inequality checkers ---------------------------------


@dataclass
class PropositionCheck:
    lhs: float
    rhs: float
    holds: bool | None
    applicable: bool
    reason: str = ""


def verify_proposition(p: float, counts) -> PropositionCheck:
    """Check sum_i p^(N_i) < p^N for a k-way split of N boundaries.

    Applicable when p > 1, k >= 3 and p^(N_i) >= 2 for every part (each head
    needs at least a couple of optimization steps). Under those conditions the
    inequality always holds; precondition violations are reported as
    inapplicable rather than false.
    """
    counts = np.asarray(counts, dtype=np.float64)
    k = counts.size
    lhs = float(np.sum(p ** counts))
    rhs = float(p ** counts.sum())
    if p <= 1.0:
        return PropositionCheck(lhs, rhs, None, False, "requires p > 1")
    if k < 3:
        return PropositionCheck(lhs, rhs, None, False, "requires k >= 3")
    if (p ** counts < 2.0).any():
        return PropositionCheck(lhs, rhs, None, False,
                                "requires p^(N_i) >= 2 for every part")
    return PropositionCheck(lhs, rhs, lhs < rhs, True)


def verify_proposition_smaller_nets(p: float, p_heads, counts) -> PropositionCheck:
    """Variant with per-head rates p_i > p (smaller networks fit one boundary
    more slowly): checks sum_i p_i^(N_i) < p^N.

    The stated applicability margin is (p/p_max) * 2^(k-1) > k. That margin
    alone does not bound the largest term when the head with the most
    boundaries also has a large rate, so this checker additionally requires
    the sharper margin (p/p_max)^(N_max) * 2^(k-1) > k, which does guarantee
    the inequality.
    """
    counts = np.asarray(counts, dtype=np.float64)
    rates = np.asarray(p_heads, dtype=np.float64)
    if rates.shape != counts.shape:
        raise ConfigError("one rate per part required")
    k = counts.size
    lhs = float(np.sum(rates ** counts))
    rhs = float(p ** counts.sum())
    if p <= 1.0:
        return PropositionCheck(lhs, rhs, None, False, "requires p > 1")
    if k < 3:
        return PropositionCheck(lhs, rhs, None, False, "requires k >= 3")
    if (rates <= p).any():
        return PropositionCheck(lhs, rhs, None, False, "requires p_i > p")
    if (p ** counts < 2.0).any():
        return PropositionCheck(lhs, rhs, None, False,
                                "requires p^(N_i) >= 2 for every part")
    p_hat = float(rates.max())
    n_hat = float(counts.max())
    stated = (p / p_hat) * 2.0 ** (k - 1) > k
    sufficient = (p / p_hat) ** n_hat * 2.0 ** (k - 1) > k
    if not stated:
        return PropositionCheck(lhs, rhs, None, False,
                                "margin (p/p_max)*2^(k-1) > k not met")
    if not sufficient:
        return PropositionCheck(lhs, rhs, None, False,
                                "margin (p/p_max)^N_max*2^(k-1) > k not met")
    return PropositionCheck(lhs, rhs, lhs < rhs, True)
