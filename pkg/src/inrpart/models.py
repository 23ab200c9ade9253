"""Coordinate-MLP construction: sinusoidal nets and ReLU nets with harmonic
positional embedding, at the capacities used for head-count comparisons."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .autodiff import ParamSet, layer_activations
from .errors import ConfigError

# hidden width per head count, chosen so total parameters stay within a few
# percent of the 1-head model (3 hidden layers, 1 output channel)
CAPACITY = {
    "sine": {1: 512, 2: 360, 3: 296, 4: 256, 5: 228, 6: 208,
             7: 192, 8: 180, 9: 170, 10: 162, 11: 154, 12: 146},
    "relu_pe": {1: 512, 2: 352, 3: 282, 4: 240, 5: 210, 6: 188,
                7: 172, 8: 158, 9: 148, 10: 140, 11: 130, 12: 124},
}


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of one head.

    hidden_layers counts the hidden-to-hidden affine maps: the full stack is
    in -> hidden, hidden_layers x (hidden -> hidden), hidden -> out.
    """

    arch: str = "sine"              # "sine" | "relu_pe"
    input_dim: int = 2
    output_dim: int = 1
    hidden_features: int = 256
    hidden_layers: int = 3
    omega0_first: float = 60.0
    omega0_hidden: float = 30.0
    n_harmonics: int = 60           # relu_pe only
    harmonic_schedule: str = "linear"   # "linear" | "geometric"
    local_coords: bool = False      # renormalize coords per sub-domain

    def __post_init__(self):
        if self.arch not in ("sine", "relu_pe"):
            raise ConfigError(f"unknown arch {self.arch!r}")
        if self.input_dim not in (1, 2):
            raise ConfigError("input_dim must be 1 or 2")
        if self.output_dim not in (1, 3):
            raise ConfigError("output_dim must be 1 or 3")
        if self.hidden_layers < 1:
            raise ConfigError("hidden_layers must be >= 1")
        if self.hidden_features < 1:
            raise ConfigError("hidden_features must be >= 1")
        if self.arch == "sine" and (self.omega0_first <= 0 or self.omega0_hidden <= 0):
            raise ConfigError("omega0 must be positive")
        if self.arch == "relu_pe" and self.n_harmonics < 1:
            raise ConfigError("n_harmonics must be >= 1")
        if self.harmonic_schedule not in ("linear", "geometric"):
            raise ConfigError(f"unknown harmonic schedule {self.harmonic_schedule!r}")

    @property
    def first_layer_dim(self) -> int:
        """Input width of the first affine layer (embedded dim for relu_pe)."""
        if self.arch == "relu_pe":
            return self.input_dim * 2 * self.n_harmonics
        return self.input_dim

    @property
    def n_affine_layers(self) -> int:
        return self.hidden_layers + 2

    def activations(self):
        return layer_activations(self.n_affine_layers, self.arch,
                                 self.omega0_first, self.omega0_hidden)

    def with_hidden(self, hidden_features: int) -> "ModelConfig":
        return replace(self, hidden_features=hidden_features)

    def param_count(self) -> int:
        d_in, h, d_out = self.first_layer_dim, self.hidden_features, self.output_dim
        return (d_in + 1) * h + self.hidden_layers * (h + 1) * h + (h + 1) * d_out


def capacity_for(arch: str, head_count: int) -> int:
    """Tabulated hidden width keeping k-head ensembles at ~constant capacity."""
    table = CAPACITY.get(arch)
    if table is None:
        raise ConfigError(f"unknown arch {arch!r}")
    if head_count not in table:
        raise ConfigError(
            f"no tabulated capacity for {head_count} heads (1..12); "
            "pass hidden_features explicitly to override")
    return table[head_count]


def embed_harmonic(coords: np.ndarray, n_harmonics: int,
                   schedule: str = "linear") -> np.ndarray:
    """Map each coordinate component x to (sin f_i x, cos f_i x) pairs.

    Linear schedule uses f_i = i*pi for i in 1..n; the geometric option uses
    f_i = pi*2^(i-1). Layout is component-major, frequency-minor, sin before
    cos, so the output is [B, d*2*n].
    """
    if coords.ndim != 2:
        raise ConfigError(f"coords must be [B, d], got {coords.shape}")
    if schedule == "linear":
        freqs = np.pi * np.arange(1, n_harmonics + 1, dtype=np.float64)
    elif schedule == "geometric":
        freqs = np.pi * 2.0 ** np.arange(n_harmonics, dtype=np.float64)
    else:
        raise ConfigError(f"unknown harmonic schedule {schedule!r}")
    # angles[b, j, i] = coords[b, j] * freqs[i]
    ang = coords[:, :, None] * freqs[None, None, :]
    out = np.empty((coords.shape[0], coords.shape[1], 2 * n_harmonics))
    out[:, :, 0::2] = np.sin(ang)
    out[:, :, 1::2] = np.cos(ang)
    return out.reshape(coords.shape[0], -1)


def build(config: ModelConfig, seed: int) -> ParamSet:
    """Initialize one head deterministically from the seed.

    Sine nets use the standard sinusoidal-net scheme: first layer weights
    U(-1/fan_in, 1/fan_in), all later layers U(-sqrt(6/fan_in)/omega_hidden, +...).
    relu_pe nets use He-style uniform U(+-sqrt(6/fan_in)). Biases are
    U(+-1/sqrt(fan_in)) everywhere.
    """
    rng = np.random.default_rng(seed)
    dims = ([config.first_layer_dim]
            + [config.hidden_features] * (config.hidden_layers + 1)
            + [config.output_dim])
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        if config.arch == "sine":
            if i == 0:
                lim = 1.0 / fan_in
            else:
                lim = np.sqrt(6.0 / fan_in) / config.omega0_hidden
        else:
            lim = np.sqrt(6.0 / fan_in)
        W = rng.uniform(-lim, lim, size=(fan_out, fan_in))
        b = rng.uniform(-1.0, 1.0, size=fan_out) / np.sqrt(fan_in)
        layers.append((W, b))
    net = ParamSet(layers)
    net.check_chain()
    return net


def prepare_inputs(config: ModelConfig, coords: np.ndarray) -> np.ndarray:
    """Coordinates as the first affine layer consumes them."""
    if coords.shape[1] != config.input_dim:
        raise ConfigError(
            f"coords are {coords.shape[1]}-dimensional, config expects {config.input_dim}")
    if config.arch == "relu_pe":
        return embed_harmonic(coords, config.n_harmonics, config.harmonic_schedule)
    return coords
