"""Experiment front-end: config resolution, subcommand dispatch, file emission.

Exit codes: 0 success, 1 configuration/input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import assets
from .autodiff import ACT_RELU, ACT_SINE, save_weights
from .config import SCHEMAS, resolve, write_snapshot
from .errors import ConfigError, InputError, PartitionError, TrainingError
from .models import ModelConfig, capacity_for
from .partition import (GridSpec, OversegParams, full_mask, grid_for_heads,
                        pog, pos, save_mask_binary, save_mask_png)
from .trainer import (PSNR_CSV_CAP, ImageField, fit_partitioned, fit_single,
                      predict_head, predict_partitioned)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_schema_flags(parser: argparse.ArgumentParser, subcommand: str) -> None:
    for name, f in SCHEMAS[subcommand].items():
        flag = "--" + name.replace("_", "-")
        if f.type is bool:
            parser.add_argument(flag, dest=name, default=None,
                                action=argparse.BooleanOptionalAction, help=f.help)
        else:
            parser.add_argument(flag, dest=name, type=f.type, default=None,
                                help=f.help)
    parser.add_argument("--config", dest="config_file", default=None,
                        help="JSON config file (or a previous run snapshot)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="inrpart",
                     description="partitioned implicit neural representation lab")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SCHEMAS:
        _add_schema_flags(sub.add_parser(name, help=f"{name} experiment"), name)
    return parser


def _load_image(name: str, gray: bool) -> ImageField:
    from .imageio import load_png

    path = Path(name)
    if path.exists():
        return load_png(path, gray=gray)
    return assets.load_photo(name, gray=gray)


def _write_metrics_csv(path, report) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "loss", "psnr"])
        for i, (loss, p) in enumerate(zip(report.loss, report.psnr_series)):
            w.writerow([i + 1, repr(loss), repr(min(p, PSNR_CSV_CAP))])


def _model_config_json(cfg: ModelConfig) -> dict:
    return {
        "arch": cfg.arch, "input_dim": cfg.input_dim, "output_dim": cfg.output_dim,
        "hidden_features": cfg.hidden_features, "hidden_layers": cfg.hidden_layers,
        "omega0_first": cfg.omega0_first, "omega0_hidden": cfg.omega0_hidden,
        "n_harmonics": cfg.n_harmonics,
    }


def _mask_for(cfg: dict, image: ImageField, rule: str, k: int):
    if rule == "none":
        return full_mask(image.height, image.width)
    if rule == "pog":
        if cfg.get("rx") and cfg.get("ry"):
            return pog(image.height, image.width, GridSpec(cfg["rx"], cfg["ry"]))
        return pog(image.height, image.width,
                   grid_for_heads(image.height, image.width, k))
    params = OversegParams(band=(cfg.get("band_lo", 50), cfg.get("band_hi", 300)))
    return pos(image.values, k, params)


def cmd_fit(cfg: dict) -> int:
    image = _load_image(cfg["image"], cfg["gray"])
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    k = cfg["heads"] if cfg["rule"] != "none" else 1
    hidden = cfg["hidden"] or capacity_for(cfg["arch"], k)
    model = ModelConfig(arch=cfg["arch"], input_dim=2, output_dim=image.channels,
                        hidden_features=hidden, hidden_layers=cfg["layers"],
                        omega0_first=cfg["omega_first"],
                        omega0_hidden=cfg["omega_hidden"])
    mask = _mask_for(cfg, image, cfg["rule"], k)

    if cfg["rule"] == "none":
        net, report = fit_single(image, model, cfg["steps"], cfg["lr"], cfg["seed"],
                                 sample_px=cfg["sample"] or None,
                                 loss_mode=cfg["loss"])
        heads = [net]
        pred = predict_head(net, model, image.coords()).reshape(image.values.shape)
    else:
        heads, report = fit_partitioned(image, mask, model, cfg["steps"], cfg["lr"],
                                        cfg["seed"], loss_mode=cfg["loss"],
                                        threads=cfg["threads"])
        pred = predict_partitioned(heads, [model] * mask.k, mask, image)
        save_mask_png(out / "mask.png", mask)
        save_mask_binary(out / "mask.bin", mask)

    _write_metrics_csv(out / "metrics.csv", report)
    from .imageio import save_png

    save_png(out / "pred.png", ImageField(pred))
    act = ACT_SINE if model.arch == "sine" else ACT_RELU
    weight_files = []
    for i, net in enumerate(heads):
        name = f"head_{i:02d}.inrw"
        save_weights(out / name, net, act, model.omega0_first)
        weight_files.append(name)
    with open(out / "manifest.json", "w") as f:
        json.dump({
            "model": _model_config_json(model),
            "mask": {"k": mask.k, "provenance": mask.provenance},
            "weights": weight_files,
            "final_psnr": min(report.final_psnr, PSNR_CSV_CAP),
            "final_ssim": report.final_ssim,
            "seconds": report.seconds,
        }, f, indent=2)
        f.write("\n")
    print(f"fit: {cfg['image']} rule={cfg['rule']} k={mask.k} "
          f"psnr={report.final_psnr:.3f} ssim={report.final_ssim:.4f}")
    return 0


def cmd_segment(cfg: dict) -> int:
    image = _load_image(cfg["image"], cfg["gray"])
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    if cfg["rule"] == "pog":
        if cfg["rx"] and cfg["ry"]:
            mask = pog(image.height, image.width, GridSpec(cfg["rx"], cfg["ry"]))
        else:
            mask = pog(image.height, image.width,
                       grid_for_heads(image.height, image.width, cfg["k"]))
    else:
        params = OversegParams(scale=cfg["scale"] or None, sigma=cfg["sigma"],
                               min_size=cfg["min_size"],
                               band=(cfg["band_lo"], cfg["band_hi"]))
        mask = pos(image.values, cfg["k"], params)
    save_mask_png(out / "mask.png", mask)
    save_mask_binary(out / "mask.bin", mask)
    sizes = mask.region_sizes()
    print(f"segment: {cfg['image']} rule={cfg['rule']} k={mask.k} "
          f"areas min={sizes.min()} max={sizes.max()}")
    return 0


def cmd_hypothesis(cfg: dict) -> int:
    from .hypothesis_lab import (DESK_SWEEP_1D, DESK_SWEEP_2D, PAPER_SWEEP_1D,
                                 run_sweep, write_fit_csv, write_sweep_csv)

    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    kw: dict = dict(n_seeds=cfg["seeds"], lr=cfg["lr"], threshold=cfg["threshold"],
                    cap=cfg["cap"], base_seed=cfg["seed"])
    if cfg["preset"] == "desk":
        preset = DESK_SWEEP_1D if cfg["dim"] == 1 else DESK_SWEEP_2D
        kw["cap"] = min(cfg["cap"], preset["cap"])
        if cfg["dim"] == 1:
            kw["n_values"] = preset["n_values"]
        else:
            kw["m_values"] = preset["m_values"]
    elif cfg["preset"] == "paper":
        kw["n_values"] = PAPER_SWEEP_1D["n_values"]
        kw["n_seeds"] = PAPER_SWEEP_1D["n_seeds"]
    else:
        if cfg["dim"] == 1:
            kw["n_values"] = tuple(int(v) for v in cfg["n_list"].split(",") if v)
        else:
            kw["m_values"] = tuple(int(v) for v in cfg["m_list"].split(",") if v)
    report = run_sweep(cfg["dim"], **kw)
    write_sweep_csv(out / "sweep.csv", report)
    write_fit_csv(out / "fit.csv", report)
    (out / "summary.txt").write_text(report.summary() + "\n")
    print(report.summary())
    return 0


def cmd_spectra(cfg: dict) -> int:
    from .spectra import (compare_subparts, dft2, write_comparison_csv,
                          write_slice_csv)

    image = _load_image(cfg["image"], gray=False)
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    rx = cfg["rx"] or -(-image.width // 2)
    ry = cfg["ry"] or -(-image.height // 2)
    mask = pog(image.height, image.width, GridSpec(rx, ry))
    spec = dft2(image.values)
    write_slice_csv(out / "whole_slice_x.csv", spec, "x")
    write_slice_csv(out / "whole_slice_y.csv", spec, "y")
    rows = compare_subparts(image.values, mask)
    write_comparison_csv(out / "comparison.csv", rows)
    print(f"spectra: {cfg['image']} parts={mask.k} "
          f"whole_zero_amp={rows[0].zero_amp:.2f}")
    return 0


def _load_corpus(cfg: dict) -> list[ImageField]:
    if cfg["corpus"] == "bundled":
        train, _ = assets.meta_corpus()
        return train
    from .imageio import load_png

    paths = sorted(Path(cfg["corpus"]).glob("*.png"))
    if not paths:
        raise InputError(f"no PNGs under {cfg['corpus']}")
    return [load_png(p, gray=True) for p in paths]


def cmd_meta_train(cfg: dict) -> int:
    from .meta import MetaTrainConfig, meta_train, save_meta_state

    corpus = _load_corpus(cfg)
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    model = ModelConfig(arch="sine", input_dim=2, output_dim=corpus[0].channels,
                        hidden_features=cfg["hidden"], hidden_layers=cfg["layers"],
                        omega0_first=cfg["omega_first"],
                        omega0_hidden=cfg["omega_hidden"])
    mtc = MetaTrainConfig(model=model, rule=cfg["rule"], k=cfg["k"], m=cfg["m"],
                          alpha=cfg["alpha"], beta=cfg["beta"],
                          batch_size=cfg["batch"], outer_steps=cfg["outer_steps"],
                          seed=cfg["seed"],
                          checkpoint_every=cfg["checkpoint_every"])
    log_rows: list[tuple[int, float]] = []
    state = meta_train(corpus, mtc, checkpoint_dir=out,
                       overseg=OversegParams(band=(cfg["band_lo"], cfg["band_hi"])),
                       log_rows=log_rows)
    save_meta_state(str(out / "meta"), state)
    with open(out / "train_log.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["outer_step", "batch_loss"])
        for step, loss in log_rows:
            w.writerow([step, repr(loss)])
    print(f"meta-train: rule={cfg['rule']} outer_steps={state.outer_step} "
          f"checkpoint={out / 'meta'}")
    return 0


def cmd_meta_finetune(cfg: dict) -> int:
    from .meta import load_meta_state, meta_finetune

    state = load_meta_state(cfg["checkpoint"])
    image = _load_image(cfg["image"], cfg["gray"])
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    k = 1 if cfg["rule"] == "none" else cfg["k"]
    mask = _mask_for(cfg, image, cfg["rule"], k)
    alpha = None if cfg["alpha"] == 0.0 else [cfg["alpha"]] * max(cfg["views"], 1)
    heads, report = meta_finetune(state, image, mask, cfg["views"], alpha=alpha)
    with open(out / "psnr.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["views", "psnr"])
        for v, p in enumerate(report.psnr_series):
            w.writerow([v, repr(min(p, PSNR_CSV_CAP))])
    pred = predict_partitioned(heads, [state.config] * mask.k, mask, image)
    from .imageio import save_png

    save_png(out / "pred.png", ImageField(pred))
    print(f"meta-finetune: rule={cfg['rule']} views={cfg['views']} "
          f"psnr={report.final_psnr:.3f}")
    return 0


def cmd_check(cfg: dict) -> int:
    from .checks import run_check_suite

    ok, lines = run_check_suite(n_nets=cfg["nets"], n_instances=cfg["instances"],
                                seed=cfg["seed"])
    for line in lines:
        print(line)
    if cfg["out_dir"]:
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "check.txt").write_text("\n".join(lines) + "\n")
    return 0 if ok else 2


_HANDLERS = {
    "fit": cmd_fit,
    "segment": cmd_segment,
    "hypothesis": cmd_hypothesis,
    "spectra": cmd_spectra,
    "meta-train": cmd_meta_train,
    "meta-finetune": cmd_meta_finetune,
    "check": cmd_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    sub = ns.subcommand
    values = {k: v for k, v in vars(ns).items()
              if k not in ("subcommand", "config_file")}
    try:
        cfg = resolve(sub, values, ns.config_file)
        if cfg.get("out_dir"):
            write_snapshot(cfg["out_dir"], sub, cfg)
        return _HANDLERS[sub](cfg)
    except (ConfigError, InputError, PartitionError, OSError, json.JSONDecodeError) as exc:
        print(f"inrpart {sub}: config error: {exc}", file=sys.stderr)
        return 1
    except TrainingError as exc:
        print(f"inrpart {sub}: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
