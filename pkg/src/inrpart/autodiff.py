"""Reverse-mode differentiation for dense coordinate MLPs.

Everything is float64. A network is a plain stack of affine layers with an
elementwise activation per layer; the tape caches exactly what the backward
pass needs (layer inputs plus the activation cosines for sine layers), so one
forward gives one exact backward.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, TrainingError, UsageError

# activation codes used on tapes and in the weight file header
ACT_SINE = 0
ACT_RELU = 1
ACT_LINEAR = 2

_MAGIC = b"INRP"
_VERSION = 1


@dataclass
class ParamSet:
    """Weights of one MLP: list of (W, b) with W shaped [out, in]."""

    layers: list[tuple[np.ndarray, np.ndarray]]

    def copy(self) -> "ParamSet":
        return ParamSet([(W.copy(), b.copy()) for W, b in self.layers])

    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in self.layers)

    def shapes(self) -> list[tuple[int, int]]:
        """(in, out) per layer."""
        return [(W.shape[1], W.shape[0]) for W, b in self.layers]

    def all_finite(self) -> bool:
        return all(np.isfinite(W).all() and np.isfinite(b).all() for W, b in self.layers)

    def check_chain(self) -> None:
        for i in range(len(self.layers) - 1):
            if self.layers[i][0].shape[0] != self.layers[i + 1][0].shape[1]:
                raise ConfigError(
                    f"layer {i} output dim {self.layers[i][0].shape[0]} does not "
                    f"chain into layer {i + 1} input dim {self.layers[i + 1][0].shape[1]}"
                )


@dataclass
class AdamState:
    """Per-parameter Adam moments plus the shared step counter."""

    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, net: ParamSet, lr: float, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in net.layers]
        v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in net.layers]
        return cls(m=m, v=v, t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


@dataclass
class Tape:
    """Cached forward pass. One backward() per tape."""

    net: ParamSet
    # per layer: (input to the affine map, pre-activation derivative factor)
    # factor = omega*cos(omega*z) for sine, 1/0 mask for relu, None for linear
    records: list[tuple[np.ndarray, np.ndarray | None]] = field(default_factory=list)
    used: bool = False


def layer_activations(n_layers: int, arch: str, omega_first: float,
                      omega_hidden: float) -> list[tuple[int, float]]:
    """(activation code, omega) per affine layer; the last layer is linear."""
    acts = []
    for i in range(n_layers - 1):
        if arch == "sine":
            acts.append((ACT_SINE, omega_first if i == 0 else omega_hidden))
        elif arch == "relu_pe":
            acts.append((ACT_RELU, 0.0))
        else:
            raise ConfigError(f"unknown arch {arch!r}")
    acts.append((ACT_LINEAR, 0.0))
    return acts


def forward(net: ParamSet, acts: list[tuple[int, float]], x: np.ndarray,
            want_tape: bool = True) -> tuple[np.ndarray, Tape | None]:
    """Run the MLP on a batch x of shape [B, in_dim].

    Returns the output [B, out_dim] and, when want_tape, a Tape that replays
    exactly this pass. Embedding (for relu_pe nets) happens in the caller;
    here x is already whatever the first affine layer consumes.
    """
    if x.ndim != 2:
        raise InputError(f"coords must be [B, d], got shape {x.shape}")
    if x.shape[1] != net.layers[0][0].shape[1]:
        raise ConfigError(
            f"input dim {x.shape[1]} does not match first layer in-dim "
            f"{net.layers[0][0].shape[1]}"
        )
    if not np.isfinite(x).all():
        raise InputError("non-finite values in input coordinates")
    if len(acts) != len(net.layers):
        raise ConfigError("activation list length does not match layer count")

    tape = Tape(net=net) if want_tape else None
    a = x
    for (W, b), (code, omega) in zip(net.layers, acts):
        z = a @ W.T + b
        if code == ACT_SINE:
            wz = omega * z
            out = np.sin(wz)
            factor = omega * np.cos(wz) if want_tape else None
        elif code == ACT_RELU:
            out = np.maximum(z, 0.0)
            factor = (z > 0).astype(np.float64) if want_tape else None
        else:
            out = z
            factor = None
        if want_tape:
            tape.records.append((a, factor))
        a = out
    return a, tape


def backward(tape: Tape, loss_grad: np.ndarray) -> ParamSet:
    """Exact gradients of sum(loss_grad * output) w.r.t. every parameter."""
    if tape.used:
        raise UsageError("tape has already been consumed by a backward pass")
    if not np.isfinite(loss_grad).all():
        raise InputError("non-finite loss gradient")
    tape.used = True

    net = tape.net
    grads: list[tuple[np.ndarray, np.ndarray] | None] = [None] * len(net.layers)
    g = loss_grad
    for i in range(len(net.layers) - 1, -1, -1):
        a_in, factor = tape.records[i]
        dz = g if factor is None else g * factor
        grads[i] = (dz.T @ a_in, dz.sum(axis=0))
        if i > 0:
            g = dz @ net.layers[i][0]
    return ParamSet(layers=grads)  # type: ignore[arg-type]


def mse_loss(pred: np.ndarray, target: np.ndarray,
             mode: str = "mean") -> tuple[float, np.ndarray]:
    """Squared-error loss and its gradient w.r.t. pred.

    mode="mean" averages over every entry (batch and channels); mode="sum"
    is the plain sum of squares.
    """
    diff = pred - target
    if mode == "mean":
        loss = float(np.mean(diff * diff))
        grad = (2.0 / diff.size) * diff
    elif mode == "sum":
        loss = float(np.sum(diff * diff))
        grad = 2.0 * diff
    else:
        raise ConfigError(f"unknown loss mode {mode!r}")
    return loss, grad


def adam_step(net: ParamSet, grads: ParamSet, state: AdamState) -> None:
    """One bias-corrected Adam update, in place. t increments by exactly 1."""
    for (gW, gb) in grads.layers:
        if not (np.isfinite(gW).all() and np.isfinite(gb).all()):
            raise TrainingError("non-finite gradient in Adam update", step=state.t)
    state.t += 1
    b1t = 1.0 - state.beta1 ** state.t
    b2t = 1.0 - state.beta2 ** state.t
    for (W, b), (gW, gb), (mW, mb), (vW, vb) in zip(
            net.layers, grads.layers, state.m, state.v):
        for p, g, m, v in ((W, gW, mW, vW), (b, gb, mb, vb)):
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * (g * g)
            p -= state.lr * (m / b1t) / (np.sqrt(v / b2t) + state.eps)


def grad_check(net: ParamSet, acts: list[tuple[int, float]], coords: np.ndarray,
               targets: np.ndarray, h: float = 1e-5) -> float:
    """Worst disagreement between tape gradients and central differences,
    relative to the largest gradient magnitude.

    Central differences at h=1e-5 resolve a gradient to about h^2 times the
    local third derivative, so disagreement is measured against
    max(|g_ad|, |g_fd|) over the whole parameter set rather than entry by
    entry: near-zero entries would otherwise report pure truncation noise.
    Intended for small batches (the sweep re-evaluates the loss twice per
    parameter).
    """
    pred, tape = forward(net, acts, coords)
    _, lgrad = mse_loss(pred, targets)
    g_ad = backward(tape, lgrad)

    def loss_at(p: ParamSet) -> float:
        out, _ = forward(p, acts, coords, want_tape=False)
        return mse_loss(out, targets)[0]

    worst_abs = 0.0
    scale = 0.0
    work = net.copy()
    for li, (W, b) in enumerate(work.layers):
        for arr, g_arr in ((W, g_ad.layers[li][0]), (b, g_ad.layers[li][1])):
            flat = arr.reshape(-1)
            gflat = g_arr.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                lp = loss_at(work)
                flat[j] = orig - h
                lm = loss_at(work)
                flat[j] = orig
                g_fd = (lp - lm) / (2.0 * h)
                worst_abs = max(worst_abs, abs(gflat[j] - g_fd))
                scale = max(scale, abs(gflat[j]), abs(g_fd))
    return worst_abs / max(scale, 1e-12)


# --- weight file format -----------------------------------------------------
#
# little-endian binary:
#   "INRP" | version u32 | layer count u32 | (in u32, out u32) per layer
#   | activation tag u8 | omega0 f64
#   | per layer: W row-major f64 [out*in], then b f64 [out]


def save_weights(path, net: ParamSet, activation: int, omega0: float) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(net.layers)))
        for d_in, d_out in net.shapes():
            f.write(struct.pack("<II", d_in, d_out))
        f.write(struct.pack("<B", activation))
        f.write(struct.pack("<d", omega0))
        for W, b in net.layers:
            f.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_weights(path) -> tuple[ParamSet, int, float]:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise InputError(f"{path}: not an INRP weight file")
        version, n_layers = struct.unpack("<II", f.read(8))
        if version != _VERSION:
            raise InputError(f"{path}: unsupported weight file version {version}")
        dims = [struct.unpack("<II", f.read(8)) for _ in range(n_layers)]
        (activation,) = struct.unpack("<B", f.read(1))
        (omega0,) = struct.unpack("<d", f.read(8))
        layers = []
        for d_in, d_out in dims:
            W = np.frombuffer(f.read(8 * d_in * d_out), dtype="<f8").reshape(d_out, d_in).copy()
            b = np.frombuffer(f.read(8 * d_out), dtype="<f8").copy()
            layers.append((W, b))
    net = ParamSet(layers)
    net.check_chain()
    return net, activation, omega0
