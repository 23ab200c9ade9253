"""Experiment configuration: explicit per-subcommand schemas, no hidden
defaults. Every run resolves its full config (defaults, then an optional JSON
config file, then command-line flags) and writes the result next to its
outputs, so re-running the snapshot reproduces the run."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class Field:
    type: type
    default: object
    help: str
    required: bool = False
    choices: tuple | None = None


SCHEMAS: dict[str, dict[str, Field]] = {
    "fit": {
        "image": Field(str, None, "input PNG path or bundled asset name", required=True),
        "gray": Field(bool, False, "average RGB channels to grayscale"),
        "arch": Field(str, "sine", "model architecture", choices=("sine", "relu_pe")),
        "rule": Field(str, "none", "partition rule", choices=("none", "pog", "pos")),
        "heads": Field(int, 1, "number of heads (k)"),
        "rx": Field(int, 0, "PoG stride along width (0 = derive from heads)"),
        "ry": Field(int, 0, "PoG stride along height (0 = derive from heads)"),
        "hidden": Field(int, 0, "hidden features (0 = capacity table for #heads)"),
        "layers": Field(int, 3, "hidden layers"),
        "omega_first": Field(float, 60.0, "first-layer sine frequency"),
        "omega_hidden": Field(float, 30.0, "hidden-layer sine frequency"),
        "steps": Field(int, 300, "optimization steps"),
        "lr": Field(float, 1e-4, "Adam learning rate"),
        "loss": Field(str, "mean", "squared-error reduction", choices=("mean", "sum")),
        "sample": Field(int, 0, "pixels sampled per step (0 = full batch)"),
        "seed": Field(int, 0, "RNG seed"),
        "threads": Field(int, 1, "worker threads for per-head training"),
        "out_dir": Field(str, "out/fit", "output directory"),
    },
    "segment": {
        "image": Field(str, None, "input PNG path or bundled asset name", required=True),
        "gray": Field(bool, False, "average RGB channels to grayscale"),
        "rule": Field(str, "pog", "partition rule", choices=("pog", "pos")),
        "rx": Field(int, 0, "PoG stride along width"),
        "ry": Field(int, 0, "PoG stride along height"),
        "k": Field(int, 4, "region count (PoS, or PoG via closest grid)"),
        "scale": Field(float, 0.0, "over-segmentation scale (0 = search the band)"),
        "sigma": Field(float, 0.0, "pre-smoothing sigma"),
        "min_size": Field(int, 4, "minimum over-segment size"),
        "band_lo": Field(int, 50, "over-segment count band, lower edge"),
        "band_hi": Field(int, 300, "over-segment count band, upper edge"),
        "seed": Field(int, 0, "RNG seed (recorded; the pipeline is deterministic)"),
        "out_dir": Field(str, "out/segment", "output directory"),
    },
    "hypothesis": {
        "dim": Field(int, 1, "signal dimensionality", choices=(1, 2)),
        "preset": Field(str, "desk", "sweep preset", choices=("desk", "paper", "custom")),
        "n_list": Field(str, "", "custom 1D boundary counts, comma separated"),
        "m_list": Field(str, "", "custom 2D boundary products, comma separated"),
        "seeds": Field(int, 3, "repeats per boundary count"),
        "lr": Field(float, 1e-3, "Adam learning rate"),
        "threshold": Field(float, 0.05, "test-MSE convergence threshold"),
        "cap": Field(int, 20000, "epoch cap (censoring)"),
        "seed": Field(int, 0, "base RNG seed"),
        "out_dir": Field(str, "out/hypothesis", "output directory"),
    },
    "spectra": {
        "image": Field(str, None, "input PNG path or bundled asset name", required=True),
        "rx": Field(int, 0, "grid stride along width (0 = half width)"),
        "ry": Field(int, 0, "grid stride along height (0 = half height)"),
        "out_dir": Field(str, "out/spectra", "output directory"),
    },
    "meta-train": {
        "corpus": Field(str, "bundled", "corpus directory of PNGs, or 'bundled'"),
        "rule": Field(str, "none", "partition rule", choices=("none", "pog", "pos")),
        "k": Field(int, 4, "heads per task (ignored for rule=none)"),
        "hidden": Field(int, 64, "hidden features"),
        "layers": Field(int, 3, "hidden layers"),
        "omega_first": Field(float, 30.0, "first-layer sine frequency"),
        "omega_hidden": Field(float, 30.0, "hidden-layer sine frequency"),
        "m": Field(int, 3, "inner-loop steps"),
        "alpha": Field(float, 1e-5, "inner learning rate (scalar schedule)"),
        "beta": Field(float, 1e-4, "outer Adam learning rate"),
        "batch": Field(int, 4, "tasks per outer step"),
        "outer_steps": Field(int, 1000, "outer iterations"),
        "band_lo": Field(int, 12, "PoS over-segment band, lower edge"),
        "band_hi": Field(int, 60, "PoS over-segment band, upper edge"),
        "checkpoint_every": Field(int, 0, "periodic checkpoint interval (0 = off)"),
        "seed": Field(int, 0, "RNG seed"),
        "out_dir": Field(str, "out/meta-train", "output directory"),
    },
    "meta-finetune": {
        "checkpoint": Field(str, None, "checkpoint base path (no extension)", required=True),
        "image": Field(str, None, "input PNG path or bundled asset name", required=True),
        "gray": Field(bool, True, "average RGB channels to grayscale"),
        "rule": Field(str, "none", "partition rule", choices=("none", "pog", "pos")),
        "k": Field(int, 4, "heads (ignored for rule=none)"),
        "views": Field(int, 3, "fine-tuning gradient steps"),
        "alpha": Field(float, 0.0, "inner rate override (0 = use checkpointed schedule)"),
        "band_lo": Field(int, 12, "PoS over-segment band, lower edge"),
        "band_hi": Field(int, 60, "PoS over-segment band, upper edge"),
        "out_dir": Field(str, "out/meta-finetune", "output directory"),
    },
    "check": {
        "nets": Field(int, 20, "random networks per architecture"),
        "instances": Field(int, 1000, "randomized proposition instances"),
        "seed": Field(int, 0, "RNG seed"),
        "out_dir": Field(str, "", "optional directory for a results snapshot"),
    },
}


def resolve(subcommand: str, cli_values: dict, config_file: str | None) -> dict:
    """Merge defaults <- config file <- explicit CLI values; reject unknowns."""
    schema = SCHEMAS.get(subcommand)
    if schema is None:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    resolved = {name: f.default for name, f in schema.items()}

    if config_file:
        with open(config_file) as fh:
            loaded = json.load(fh)
        if isinstance(loaded, dict) and "config" in loaded:
            if loaded.get("subcommand") not in (None, subcommand):
                raise ConfigError(
                    f"config file is for {loaded['subcommand']!r}, not {subcommand!r}")
            loaded = loaded["config"]
        for key, value in loaded.items():
            if key not in schema:
                raise ConfigError(f"unknown config key {key!r} for {subcommand}")
            resolved[key] = _coerce(subcommand, key, schema[key], value)

    for key, value in cli_values.items():
        if value is None:
            continue
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for {subcommand}")
        resolved[key] = _coerce(subcommand, key, schema[key], value)

    for name, f in schema.items():
        if f.required and resolved[name] is None:
            raise ConfigError(f"{subcommand}: missing required option --{name.replace('_', '-')}")
        if f.choices and resolved[name] is not None and resolved[name] not in f.choices:
            raise ConfigError(
                f"{subcommand}: {name} must be one of {f.choices}, got {resolved[name]!r}")
    return resolved


def _coerce(subcommand: str, key: str, f: Field, value):
    if value is None or isinstance(value, f.type):
        return value
    if f.type in (int, float) and isinstance(value, (int, float)) and not isinstance(value, bool):
        return f.type(value)
    raise ConfigError(
        f"{subcommand}: {key} expects {f.type.__name__}, got {type(value).__name__}")


def write_snapshot(out_dir, subcommand: str, resolved: dict) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "config.json"
    with open(path, "w") as f:
        json.dump({"subcommand": subcommand, "config": resolved}, f, indent=2,
                  sort_keys=True)
        f.write("\n")
    return path
