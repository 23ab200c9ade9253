"""Amplitude spectra of whole images versus their grid sub-parts.

The discrete Fourier transform of a (grayscale) region is center-shifted so
the zero-frequency bin sits in the middle; 1D slices through that bin along
either axis give amplitude-vs-frequency curves, and a comparison table
contrasts the whole image with each rectangular sub-part.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .partition import PartitionMask


@dataclass
class Spectrum:
    """Center-shifted complex DFT of one rectangular region."""

    grid: np.ndarray             # complex [H, W], zero frequency at (H//2, W//2)
    offset: tuple[int, int]      # (row, col) of the region in its parent image
    size: tuple[int, int]

    @property
    def center(self) -> tuple[int, int]:
        return self.grid.shape[0] // 2, self.grid.shape[1] // 2

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.grid)

    @property
    def zero_frequency_amplitude(self) -> float:
        cy, cx = self.center
        return float(np.abs(self.grid[cy, cx]))


def _to_gray(region: np.ndarray) -> np.ndarray:
    a = np.asarray(region, dtype=np.float64)
    if a.ndim == 3:
        a = a.mean(axis=2)
    if a.ndim != 2 or a.size == 0:
        raise InputError(f"expected a non-empty 2D region, got shape {region.shape}")
    return a


def dft2(region: np.ndarray, offset: tuple[int, int] = (0, 0)) -> Spectrum:
    """Exact 2D DFT of a region (RGB is channel-averaged first), center-shifted."""
    a = _to_gray(region)
    grid = np.fft.fftshift(np.fft.fft2(a))
    return Spectrum(grid=grid, offset=offset, size=a.shape)


def frequency_indices(n: int) -> np.ndarray:
    """Signed integer frequency per bin of a center-shifted length-n axis."""
    return np.arange(n) - n // 2


def amplitude_slice(spec: Spectrum, axis: str) -> tuple[np.ndarray, np.ndarray]:
    """The row ('x') or column ('y') of amplitudes through the center bin,
    as (frequency index, amplitude) arrays."""
    cy, cx = spec.center
    if axis == "x":
        amps = np.abs(spec.grid[cy, :])
        freqs = frequency_indices(spec.grid.shape[1])
    elif axis == "y":
        amps = np.abs(spec.grid[:, cx])
        freqs = frequency_indices(spec.grid.shape[0])
    else:
        raise ConfigError("axis must be 'x' or 'y'")
    return freqs, amps


def high_band_mean(spec: Spectrum, axis: str) -> float:
    """Mean amplitude over the outer half of the slice (|f| > Nyquist/2)."""
    freqs, amps = amplitude_slice(spec, axis)
    cutoff = np.abs(freqs).max() / 2.0
    band = np.abs(freqs) > cutoff
    return float(amps[band].mean())


def _grid_rects(mask: PartitionMask) -> list[tuple[int, int, int, int]]:
    """(row, col, height, width) of each label, verified rectangular."""
    rects = []
    for v in range(mask.k):
        rows, cols = np.nonzero(mask.labels == v)
        r0, r1 = rows.min(), rows.max()
        c0, c1 = cols.min(), cols.max()
        if rows.size != (r1 - r0 + 1) * (c1 - c0 + 1):
            raise ConfigError(
                f"label {v} is not rectangular; sub-part spectra need a grid mask")
        rects.append((int(r0), int(c0), int(r1 - r0 + 1), int(c1 - c0 + 1)))
    return rects


@dataclass
class SubpartRow:
    name: str
    offset: tuple[int, int]
    size: tuple[int, int]
    pixels: int
    zero_amp: float
    high_x: float
    high_y: float

    @property
    def zero_amp_per_px(self) -> float:
        return self.zero_amp / self.pixels

    @property
    def high_x_per_px(self) -> float:
        return self.high_x / self.pixels

    @property
    def high_y_per_px(self) -> float:
        return self.high_y / self.pixels


def compare_subparts(image: np.ndarray, mask: PartitionMask) -> list[SubpartRow]:
    """Zero-frequency amplitude and upper-band mean amplitude for the whole
    image and each rectangular sub-part. Raw values scale with region size;
    the per-pixel properties give area-normalized columns."""
    gray = _to_gray(image)
    if mask.shape != gray.shape:
        raise ConfigError("mask does not match image")
    if not mask.provenance.startswith("grid"):
        raise ConfigError("sub-part comparison requires a grid (PoG) mask")
    rows = []
    whole = dft2(gray)
    rows.append(SubpartRow("whole", (0, 0), gray.shape, gray.size,
                           whole.zero_frequency_amplitude,
                           high_band_mean(whole, "x"), high_band_mean(whole, "y")))
    for i, (r, c, h, w) in enumerate(_grid_rects(mask)):
        spec = dft2(gray[r:r + h, c:c + w], offset=(r, c))
        rows.append(SubpartRow(f"part{i}", (r, c), (h, w), h * w,
                               spec.zero_frequency_amplitude,
                               high_band_mean(spec, "x"),
                               high_band_mean(spec, "y")))
    return rows


def write_slice_csv(path, spec: Spectrum, axis: str) -> None:
    freqs, amps = amplitude_slice(spec, axis)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frequency", "amplitude"])
        for fr, am in zip(freqs, amps):
            w.writerow([int(fr), repr(float(am))])


def write_comparison_csv(path, rows: list[SubpartRow]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["name", "row", "col", "height", "width", "pixels",
                    "zero_amp", "high_x", "high_y",
                    "zero_amp_per_px", "high_x_per_px", "high_y_per_px"])
        for r in rows:
            w.writerow([r.name, r.offset[0], r.offset[1], r.size[0], r.size[1],
                        r.pixels, repr(r.zero_amp), repr(r.high_x), repr(r.high_y),
                        repr(r.zero_amp_per_px), repr(r.high_x_per_px),
                        repr(r.high_y_per_px)])
