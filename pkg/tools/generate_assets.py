"""Regenerate the bundled test assets under src/inrpart/assets.

Everything is procedural and seeded, so the files are reproducible. Run from
the repo root:  python3 tools/generate_assets.py
"""

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
ASSETS = ROOT / "src" / "inrpart" / "assets"
PHOTO_SIZE = 48
CORPUS_SIZE = 32
N_CORPUS = 80


def save_png(path, values):
    from PIL import Image

    arr = np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    if arr.ndim == 2 or arr.shape[2] == 1:
        img = Image.fromarray(arr[:, :, 0] if arr.ndim == 3 else arr, mode="L")
    else:
        img = Image.fromarray(arr, mode="RGB")
    img.save(path, format="PNG")


def _grid(n):
    ax = np.linspace(-1.0, 1.0, n)
    gx, gy = np.meshgrid(ax, ax)
    return gx, gy


def _smooth_noise(rng, n, cells, amp):
    """Low-frequency value noise via bilinear upsampling of a coarse grid."""
    coarse = rng.uniform(-1.0, 1.0, size=(cells, cells))
    src = np.linspace(0, cells - 1, n)
    i0 = np.clip(src.astype(int), 0, cells - 2)
    f = src - i0
    rows = coarse[i0][:, i0]
    rows01 = coarse[i0][:, i0 + 1]
    rows10 = coarse[i0 + 1][:, i0]
    rows11 = coarse[i0 + 1][:, i0 + 1]
    fx = f[None, :]
    fy = f[:, None]
    out = (rows * (1 - fx) * (1 - fy) + rows01 * fx * (1 - fy)
           + rows10 * (1 - fx) * fy + rows11 * fx * fy)
    return amp * out


def photo_blocks(rng, n):
    """Mondrian-like mosaic: random axis-aligned blocks with shaded fills."""
    gx, gy = _grid(n)
    img = np.zeros((n, n, 3))
    base = rng.uniform(0.2, 0.8, size=3)
    for c in range(3):
        img[:, :, c] = base[c] + 0.2 * gx * rng.uniform(-1, 1)
    for _ in range(14):
        x0, y0 = rng.uniform(-1, 0.6, size=2)
        w, h = rng.uniform(0.25, 0.9, size=2)
        color = rng.uniform(0.05, 0.95, size=3)
        sel = (gx >= x0) & (gx < x0 + w) & (gy >= y0) & (gy < y0 + h)
        shade = 1.0 + 0.25 * (gx - x0) * rng.uniform(-1, 1)
        for c in range(3):
            img[:, :, c] = np.where(sel, np.clip(color[c] * shade, 0, 1), img[:, :, c])
    for c in range(3):
        img[:, :, c] += _smooth_noise(rng, n, 12, 0.035)
    return np.clip(img, 0.0, 1.0)


def photo_peaks(rng, n):
    """Landscape: sky gradient, sun disk, two mountain ridges, striped ground."""
    gx, gy = _grid(n)
    img = np.zeros((n, n, 3))
    sky_top = np.array([0.25, 0.45, 0.85])
    sky_bot = np.array([0.75, 0.85, 0.95])
    t = (gy + 1) / 2
    for c in range(3):
        img[:, :, c] = sky_top[c] * (1 - t) + sky_bot[c] * t
    sx, sy = rng.uniform(-0.6, 0.6), rng.uniform(-0.8, -0.3)
    sun = (gx - sx) ** 2 + (gy - sy) ** 2 < rng.uniform(0.02, 0.05)
    for c, v in enumerate([0.98, 0.9, 0.55]):
        img[:, :, c] = np.where(sun, v, img[:, :, c])
    for ridge, col in [(0.15, [0.35, 0.3, 0.4]), (0.45, [0.2, 0.18, 0.28])]:
        peaks = sum(rng.uniform(0.1, 0.4) * np.cos(np.pi * f * gx + rng.uniform(0, 6))
                    for f in (1, 2, 3))
        sel = gy > ridge - peaks * 0.3
        shade = 1.0 + 0.3 * np.sin(3 * np.pi * gx)
        for c in range(3):
            img[:, :, c] = np.where(sel, np.clip(col[c] * shade, 0, 1), img[:, :, c])
    ground = gy > 0.62
    stripes = 0.5 + 0.3 * np.sign(np.sin(7 * np.pi * (gx + gy)))
    for c, v in enumerate([0.45, 0.6, 0.25]):
        img[:, :, c] = np.where(ground, np.clip(v * stripes, 0, 1), img[:, :, c])
    for c in range(3):
        img[:, :, c] += _smooth_noise(rng, n, 10, 0.03)
    return np.clip(img, 0.0, 1.0)


def photo_cells(rng, n):
    """Voronoi mosaic with per-cell colors and radial shading."""
    gx, gy = _grid(n)
    n_sites = 12
    sites = rng.uniform(-1, 1, size=(n_sites, 2))
    colors = rng.uniform(0.1, 0.9, size=(n_sites, 3))
    d = ((gx[:, :, None] - sites[None, None, :, 0]) ** 2
         + (gy[:, :, None] - sites[None, None, :, 1]) ** 2)
    owner = d.argmin(axis=2)
    nearest = np.sqrt(d.min(axis=2))
    img = colors[owner] * (1.0 - 0.35 * nearest)[:, :, None]
    for c in range(3):
        img[:, :, c] += _smooth_noise(rng, n, 12, 0.03)
    return np.clip(img, 0.0, 1.0)


def halves(n=8):
    img = np.zeros((n, n))
    img[:, n // 2:] = 1.0
    return img


def corpus_image(rng, n):
    """Family member: oriented gradient background + a disk and a bar."""
    gx, gy = _grid(n)
    phi = rng.uniform(0, 2 * np.pi)
    base = rng.uniform(0.35, 0.65)
    slope = rng.uniform(0.1, 0.25)
    img = base + slope * (np.cos(phi) * gx + np.sin(phi) * gy)
    cx, cy = rng.uniform(-0.5, 0.5, size=2)
    r = rng.uniform(0.25, 0.5)
    disk = (gx - cx) ** 2 + (gy - cy) ** 2 < r * r
    img = np.where(disk, np.clip(img + rng.uniform(0.25, 0.4) * rng.choice([-1, 1]), 0, 1), img)
    x0 = rng.uniform(-0.9, 0.5)
    w = rng.uniform(0.15, 0.35)
    horizontal = rng.random() < 0.5
    bar = ((gy >= x0) & (gy < x0 + w)) if horizontal else ((gx >= x0) & (gx < x0 + w))
    img = np.where(bar, np.clip(img + rng.uniform(0.2, 0.35) * rng.choice([-1, 1]), 0, 1), img)
    return np.clip(img, 0.03, 0.97)


def main():
    ASSETS.mkdir(parents=True, exist_ok=True)
    (ASSETS / "meta_corpus").mkdir(exist_ok=True)

    rng = np.random.default_rng(20240701)
    save_png(ASSETS / "photo_blocks.png", photo_blocks(rng, PHOTO_SIZE))
    save_png(ASSETS / "photo_peaks.png", photo_peaks(rng, PHOTO_SIZE))
    save_png(ASSETS / "photo_cells.png", photo_cells(rng, PHOTO_SIZE))
    save_png(ASSETS / "halves.png", halves())

    with open(ASSETS / "toy_label_map.txt", "w") as f:
        f.write("# 4x4 label map with three 4-connected regions\n")
        f.write("# areas: label0=2, label1=6, label2=8\n")
        f.write("0 0 1 1\n2 2 1 1\n2 2 1 1\n2 2 2 2\n")

    crng = np.random.default_rng(20240702)
    for i in range(N_CORPUS):
        save_png(ASSETS / "meta_corpus" / f"img_{i:03d}.png",
                 corpus_image(crng, CORPUS_SIZE))
    print(f"assets written to {ASSETS}")


if __name__ == "__main__":
    sys.exit(main())
