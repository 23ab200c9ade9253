"""Self-diagnostics behind the `check` subcommand: gradient correctness over
random networks, randomized partition-complexity inequality instances, and
grid-mask pixel accounting."""

from __future__ import annotations

import numpy as np

from .autodiff import grad_check
from .hypothesis_lab import verify_proposition, verify_proposition_smaller_nets
from .models import ModelConfig, build, prepare_inputs
from .partition import GridSpec, pog

GRAD_TOL = 1e-5


def gradient_suite(arch: str, n_nets: int, seed: int) -> float:
    """Worst grad_check relative error over n_nets random small nets."""
    rng = np.random.default_rng([seed, hash(arch) % (2 ** 31)])
    worst = 0.0
    for i in range(n_nets):
        config = ModelConfig(arch=arch, input_dim=2, output_dim=1,
                             hidden_features=8, hidden_layers=3,
                             omega0_first=float(rng.uniform(5, 60)),
                             omega0_hidden=30.0, n_harmonics=4)
        net = build(config, [seed, i])
        coords = rng.uniform(-1, 1, size=(16, 2))
        targets = rng.uniform(-1, 1, size=(16, 1))
        xin = prepare_inputs(config, coords)
        worst = max(worst, grad_check(net, config.activations(), xin, targets))
    return worst


def random_proposition_instance(rng) -> tuple[float, np.ndarray]:
    """One precondition-satisfying (p, counts) pair: k >= 3, p^(N_i) >= 2."""
    k = int(rng.integers(3, 13))
    p = float(rng.uniform(1.01, 2.5))
    n_min = int(np.ceil(np.log(2.0) / np.log(p)))
    counts = rng.integers(n_min, n_min + 40, size=k)
    return p, counts


def random_smaller_nets_instance(rng) -> tuple[float, np.ndarray, np.ndarray] | None:
    """One instance for the per-head-rate variant satisfying both the stated
    margin (p/p_max)*2^(k-1) > k and the sharper per-exponent margin."""
    k = int(rng.integers(3, 13))
    p = float(rng.uniform(1.01, 1.6))
    n_min = int(np.ceil(np.log(2.0) / np.log(p)))
    counts = rng.integers(n_min, n_min + 12, size=k)
    n_hat = int(counts.max())
    # sharper margin: (p/p_hat)^n_hat * 2^(k-1) > k  =>  p_hat < p * (2^(k-1)/k)^(1/n_hat)
    cap = p * (2.0 ** (k - 1) / k) ** (1.0 / n_hat)
    if cap <= p * 1.0001:
        return None
    rates = rng.uniform(p * 1.0001, min(cap * 0.999, p * 3.0), size=k)
    if rates.max() <= p:
        return None
    return p, rates, counts


def proposition_suite(n_instances: int, seed: int) -> tuple[int, int, int]:
    """Returns (#holds, #variant holds, #violations)."""
    rng = np.random.default_rng([seed, 2])
    holds = v_holds = violations = 0
    for _ in range(n_instances):
        p, counts = random_proposition_instance(rng)
        res = verify_proposition(p, counts)
        assert res.applicable
        if res.holds:
            holds += 1
        else:
            violations += 1
    done = 0
    while done < n_instances:
        inst = random_smaller_nets_instance(rng)
        if inst is None:
            continue
        res = verify_proposition_smaller_nets(*inst)
        if not res.applicable:
            continue
        done += 1
        if res.holds:
            v_holds += 1
        else:
            violations += 1
    return holds, v_holds, violations


def pog_accounting_suite(n_cases: int, seed: int) -> bool:
    """Per-cell pixel counts match the closed-form grid arithmetic."""
    rng = np.random.default_rng([seed, 3])
    for _ in range(n_cases):
        h = int(rng.integers(1, 40))
        w = int(rng.integers(1, 40))
        rx = int(rng.integers(1, w + 1))
        ry = int(rng.integers(1, h + 1))
        mask = pog(h, w, GridSpec(rx, ry))
        nx = -(-w // rx)
        counts = mask.region_sizes()
        for j in range(-(-h // ry)):
            for i in range(nx):
                width = min((i + 1) * rx, w) - i * rx
                height = min((j + 1) * ry, h) - j * ry
                if counts[i + j * nx] != width * height:
                    return False
    return True


def run_check_suite(n_nets: int = 20, n_instances: int = 1000,
                    seed: int = 0) -> tuple[bool, list[str]]:
    lines = []
    ok = True
    for arch in ("sine", "relu_pe"):
        worst = gradient_suite(arch, n_nets, seed)
        good = worst < GRAD_TOL
        ok &= good
        lines.append(f"grad_check[{arch}] x{n_nets}: max_rel_error={worst:.3e} "
                     f"{'ok' if good else 'FAIL'} (tol {GRAD_TOL:g})")
    holds, v_holds, violations = proposition_suite(n_instances, seed)
    good = violations == 0 and holds == n_instances and v_holds == n_instances
    ok &= good
    lines.append(f"proposition x{n_instances}: holds={holds} "
                 f"variant_holds={v_holds} violations={violations} "
                 f"{'ok' if good else 'FAIL'}")
    good = pog_accounting_suite(200, seed)
    ok &= good
    lines.append(f"pog pixel accounting x200: {'ok' if good else 'FAIL'}")
    return ok, lines
