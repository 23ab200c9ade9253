"""Head-selector masks over pixel grids.

Two rules produce a one-hot label per pixel: regular grids (floor division of
pixel coordinates by a stride) and segmentation maps (graph-based
over-segmentation, connected-components relabeling, then greedy merging of
smallest regions down to k parts).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, InputError, PartitionError

_MASK_MAGIC = b"MASK"

# 4-connectivity structuring element
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class GridSpec:
    """Pixel strides of a regular grid; rx runs along width, ry along height."""

    rx: int
    ry: int

    def __post_init__(self):
        if self.rx < 1 or self.ry < 1:
            raise ConfigError("grid strides must be positive")


@dataclass
class PartitionMask:
    """Per-pixel head labels in 0..k-1; every label occurs at least once."""

    labels: np.ndarray           # int32 [H, W]
    k: int
    provenance: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape  # type: ignore[return-value]

    def region_sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.k)

    def validate(self, require_connected: bool = False) -> None:
        lab = self.labels
        if lab.min() < 0 or lab.max() >= self.k:
            raise PartitionError("labels outside 0..k-1")
        sizes = self.region_sizes()
        if (sizes == 0).any():
            missing = np.flatnonzero(sizes == 0)
            raise PartitionError(f"labels never used: {missing.tolist()}")
        if require_connected:
            for v in range(self.k):
                _, n = ndimage.label(lab == v, structure=_CROSS)
                if n != 1:
                    raise PartitionError(f"label {v} splits into {n} 4-connected parts")


def full_mask(height: int, width: int) -> PartitionMask:
    """The trivial k=1 mask covering the whole image."""
    return PartitionMask(np.zeros((height, width), dtype=np.int32), 1, "grid(full)")


def close_factors(m: int) -> tuple[int, int]:
    """Factor pair (a, b) of m with a <= b minimizing b - a."""
    if m < 1:
        raise ConfigError("need a positive integer")
    a = int(np.sqrt(m))
    while m % a:
        a -= 1
    return a, m // a


def pog(height: int, width: int, grid: GridSpec) -> PartitionMask:
    """Regular-grid mask: label = floor(x/rx) + floor(y/ry) * ceil(W/rx)."""
    if grid.rx > width or grid.ry > height:
        raise ConfigError(
            f"grid stride {grid.rx}x{grid.ry} exceeds image {width}x{height}")
    nx = -(-width // grid.rx)
    ny = -(-height // grid.ry)
    cols = np.arange(width) // grid.rx
    rows = np.arange(height) // grid.ry
    labels = (cols[None, :] + rows[:, None] * nx).astype(np.int32)
    return PartitionMask(labels, nx * ny, f"grid(rx={grid.rx},ry={grid.ry})")


def grid_for_heads(height: int, width: int, heads: int) -> GridSpec:
    """Stride choice giving a `heads`-cell grid, more cells along the longer side."""
    a, b = close_factors(heads)
    nx, ny = (b, a) if width >= height else (a, b)
    grid = GridSpec(rx=-(-width // nx), ry=-(-height // ny))
    got = (-(-width // grid.rx)) * (-(-height // grid.ry))
    if got != heads:
        raise ConfigError(
            f"cannot split {width}x{height} into {heads} grid cells; "
            "pass explicit strides")
    return grid


# --- over-segmentation -------------------------------------------------------


@dataclass(frozen=True)
class OversegParams:
    """Graph-merge over-segmentation knobs.

    scale=None searches for a value whose region count lands in `band`;
    the search is a deterministic bracket-and-bisect, no randomness involved.
    sigma > 0 pre-smooths, which blurs hard edges into transition strips of
    their own; the default keeps piecewise-constant images piecewise-constant.
    """

    scale: float | None = None
    sigma: float = 0.0
    min_size: int = 4
    band: tuple[int, int] = (50, 300)


@dataclass
class OversegResult:
    labels: np.ndarray
    n_regions: int
    scale: float
    band_warning: bool


class _DSU:
    """Union-find over pixel indices with component size and internal difference."""

    def __init__(self, n: int):
        self.parent = np.arange(n)
        self.size = np.ones(n, dtype=np.int64)
        self.thr = np.zeros(n)   # Int(C) + scale/|C|, updated on merge

    def find(self, i: int) -> int:
        p = self.parent
        root = i
        while p[root] != root:
            root = p[root]
        while p[i] != root:
            p[i], i = root, p[i]
        return root

    def union(self, a: int, b: int) -> int:
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return a


def _felzenszwalb_labels(channels: np.ndarray, scale: float, min_size: int) -> np.ndarray:
    """Graph-based region merge on 4-neighbor color-difference edges."""
    h, w, _ = channels.shape
    n = h * w
    flat = channels.reshape(n, -1)

    idx = np.arange(n).reshape(h, w)
    pairs = [
        (idx[:, :-1].ravel(), idx[:, 1:].ravel()),
        (idx[:-1, :].ravel(), idx[1:, :].ravel()),
    ]
    ea = np.concatenate([p[0] for p in pairs])
    eb = np.concatenate([p[1] for p in pairs])
    weights = np.sqrt(((flat[ea] - flat[eb]) ** 2).sum(axis=1))
    order = np.argsort(weights, kind="stable")

    dsu = _DSU(n)
    dsu.thr[:] = scale  # Int=0, |C|=1 initially
    for e in order:
        a = dsu.find(int(ea[e]))
        b = dsu.find(int(eb[e]))
        if a == b:
            continue
        wgt = weights[e]
        if wgt <= dsu.thr[a] and wgt <= dsu.thr[b]:
            r = dsu.union(a, b)
            dsu.thr[r] = wgt + scale / dsu.size[r]

    # absorb tiny components along the same edge ordering
    if min_size > 1:
        for e in order:
            a = dsu.find(int(ea[e]))
            b = dsu.find(int(eb[e]))
            if a != b and (dsu.size[a] < min_size or dsu.size[b] < min_size):
                dsu.union(a, b)

    roots = np.array([dsu.find(i) for i in range(n)])
    _, dense = np.unique(roots, return_inverse=True)
    return dense.reshape(h, w).astype(np.int32)


def overseg(image: np.ndarray, params: OversegParams = OversegParams()) -> OversegResult:
    """Over-segment an [H, W, c] image with values in [0, 1].

    Returns a label map whose region count falls inside params.band when the
    image supports it; images with too little color structure (a constant
    image being the extreme) come back with fewer regions and band_warning.
    """
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3:
        raise InputError(f"expected [H, W, c] image, got shape {image.shape}")
    if image.min() < 0.0 or image.max() > 1.0:
        raise InputError("image channels must lie in [0, 1]")

    smooth = np.stack(
        [ndimage.gaussian_filter(image[:, :, c], params.sigma)
         for c in range(image.shape[2])], axis=-1)

    def run(scale: float) -> np.ndarray:
        return _felzenszwalb_labels(smooth, scale, params.min_size)

    lo_n, hi_n = params.band
    if params.scale is not None:
        labels = run(params.scale)
        n = int(labels.max()) + 1
        return OversegResult(labels, n, params.scale, not lo_n <= n <= hi_n)

    # region count decreases as scale grows: bracket the band, then bisect
    scale = 1e-3
    labels = run(scale)
    n = int(labels.max()) + 1
    lo_s, hi_s = None, None
    for _ in range(24):
        if lo_n <= n <= hi_n:
            return OversegResult(labels, n, scale, False)
        if n > hi_n:
            lo_s = scale
        else:
            hi_s = scale
        if lo_s is None:
            scale = scale / 8.0
        elif hi_s is None:
            scale = scale * 8.0
        else:
            scale = np.sqrt(lo_s * hi_s)
        labels = run(scale)
        n = int(labels.max()) + 1
    return OversegResult(labels, n, scale, True)


# --- Algorithm steps after over-segmentation ---------------------------------


def connected_relabel(labels: np.ndarray) -> np.ndarray:
    """Split every label into maximal 4-connected components, labels dense from 0."""
    out = np.empty(labels.shape, dtype=np.int32)
    nxt = 0
    for v in np.unique(labels):
        mask = labels == v
        comp, n = ndimage.label(mask, structure=_CROSS)
        out[mask] = comp[mask] + (nxt - 1)
        nxt += n
    return out


def _adjacency(labels: np.ndarray, n: int) -> list[set[int]]:
    neigh: list[set[int]] = [set() for _ in range(n)]
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        for x, y in zip(a[diff].ravel(), b[diff].ravel()):
            neigh[x].add(int(y))
            neigh[y].add(int(x))
    return neigh


def greedy_merge(labels: np.ndarray, k: int) -> PartitionMask:
    """Merge the smallest region into its smallest 4-adjacent neighbor until
    k regions remain. Ties break toward the lowest label id. Input labels
    must be dense 0..L-1 with 4-connected regions (connected_relabel output).
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    n = int(labels.max()) + 1
    if labels.min() < 0:
        raise PartitionError("labels must be dense from 0")
    if n < k:
        raise PartitionError(
            f"only {n} regions available for k={k}; re-run over-segmentation "
            "with finer parameters")

    areas = np.bincount(labels.ravel(), minlength=n).astype(np.int64)
    neigh = _adjacency(labels, n)
    alive = set(range(n))
    target = np.arange(n)   # original label -> current representative

    count = n
    while count > k:
        s = min(alive, key=lambda i: (areas[i], i))
        if not neigh[s]:
            raise PartitionError(f"region {s} has no neighbors on a connected grid")
        r = min(neigh[s], key=lambda i: (areas[i], i))
        # fold s into r
        areas[r] += areas[s]
        alive.remove(s)
        for t in neigh[s]:
            neigh[t].discard(s)
            if t != r:
                neigh[t].add(r)
                neigh[r].add(t)
        neigh[r].discard(r)
        neigh[s] = set()
        target[target == s] = r
        count -= 1

    remap = np.full(n, -1, dtype=np.int32)
    for dense, lab in enumerate(sorted(alive)):
        remap[lab] = dense
    merged = remap[target[labels]]
    return PartitionMask(merged, k, "segmentation(merged)")


def pos(image: np.ndarray, k: int,
        params: OversegParams = OversegParams()) -> PartitionMask:
    """Segmentation-map partition: overseg -> connected relabel -> greedy merge."""
    seg = overseg(image, params)
    relabeled = connected_relabel(seg.labels)
    mask = greedy_merge(relabeled, k)
    mask.provenance = (f"segmentation(scale={seg.scale:.6g},sigma={params.sigma},"
                       f"min_size={params.min_size})")
    return mask


# --- mask files ---------------------------------------------------------------


def save_mask_png(path, mask: PartitionMask) -> None:
    """Labels in the red channel (k <= 256) plus a text sidecar with k and provenance."""
    from PIL import Image

    if mask.k > 256:
        raise ConfigError("PNG mask export supports at most 256 labels")
    h, w = mask.shape
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    rgb[:, :, 0] = mask.labels.astype(np.uint8)
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
    sidecar = str(path) + ".txt"
    with open(sidecar, "w") as f:
        f.write(f"k {mask.k}\nprovenance {mask.provenance}\n")


def load_mask_png(path) -> PartitionMask:
    from PIL import Image

    arr = np.asarray(Image.open(path).convert("RGB"))
    labels = arr[:, :, 0].astype(np.int32)
    k = int(labels.max()) + 1
    provenance = "unknown"
    try:
        with open(str(path) + ".txt") as f:
            for line in f:
                key, _, val = line.partition(" ")
                if key == "k":
                    k = int(val)
                elif key == "provenance":
                    provenance = val.strip()
    except FileNotFoundError:
        pass
    return PartitionMask(labels, k, provenance)


def save_mask_binary(path, mask: PartitionMask) -> None:
    """Raw row-major u16 labels behind a 16-byte header (magic, H, W, k)."""
    if mask.k > 65536:
        raise ConfigError("binary mask export supports at most 65536 labels")
    h, w = mask.shape
    with open(path, "wb") as f:
        f.write(_MASK_MAGIC)
        f.write(struct.pack("<III", h, w, mask.k))
        f.write(np.ascontiguousarray(mask.labels, dtype="<u2").tobytes())


def load_mask_binary(path) -> PartitionMask:
    with open(path, "rb") as f:
        if f.read(4) != _MASK_MAGIC:
            raise InputError(f"{path}: not a MASK file")
        h, w, k = struct.unpack("<III", f.read(12))
        labels = np.frombuffer(f.read(2 * h * w), dtype="<u2").reshape(h, w)
    return PartitionMask(labels.astype(np.int32), k, "loaded")
