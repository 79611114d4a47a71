"""Labeled-frame datasets: preprocessing, class-folder loading, stratified
splitting, and the synthetic 12-class texture benchmark.

Preprocessing pipeline, pinned exactly so results are bit-reproducible:
grayscale via BT.601 luma (round half up), bilinear resize to 32x32 with
half-pixel-centered sampling, then linear normalization of [0, 255] onto
[-1, 1].

The synthetic benchmark assigns one procedural texture family to each class:

    crosswalk          horizontal stripes
    curbs              step edge
    ramp               diagonal gradient
    stairs_ascending   vertical stripes
    stairs_descending  sinusoidal plaid
    gravel             uniform noise
    concrete           solid tone
    tiles              grid lines
    bricks             checkerboard
    carpets            low-frequency blobs
    snow               radial gradient
    rocks              dot lattice

Each sample jitters the family's phase, period, and contrast from a seeded
per-sample stream, so the generated corpus is deterministic for a given seed
regardless of generation order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import DataError, DecodeError, DimensionError, LabelError
from .imagefile import RawImage, decode_image

IMAGE_SIZE = 32
IMAGE_EXTENSIONS = (".pgm", ".ppm", ".png")


class ClassLabel(IntEnum):
    """The 12 hazard classes with their fixed indices."""

    CROSSWALK = 0
    CURBS = 1
    RAMP = 2
    STAIRS_ASCENDING = 3
    STAIRS_DESCENDING = 4
    GRAVEL = 5
    CONCRETE = 6
    TILES = 7
    BRICKS = 8
    CARPETS = 9
    SNOW = 10
    ROCKS = 11

    @property
    def slug(self) -> str:
        return self.name.lower()

    @classmethod
    def from_slug(cls, slug: str) -> "ClassLabel":
        try:
            return cls[slug.upper()]
        except KeyError:
            valid = ", ".join(label.slug for label in cls)
            raise LabelError(f"unknown class {slug!r}; valid labels: {valid}") from None


LABEL_SLUGS = tuple(label.slug for label in ClassLabel)


@dataclass(frozen=True)
class LabeledImage:
    """One preprocessed sample: a 1x32x32 tensor in [-1, 1] plus its label
    and a source identifier (file path or synthetic descriptor)."""

    tensor: np.ndarray
    label: ClassLabel
    source: str


@dataclass
class Dataset:
    """Ordered samples. Iteration order is sorted by source identifier so
    training is bit-reproducible across machines and filesystems."""

    items: list[LabeledImage] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i: int) -> LabeledImage:
        return self.items[i]

    def histogram(self) -> dict[str, int]:
        counts = {slug: 0 for slug in LABEL_SLUGS}
        for item in self.items:
            counts[ClassLabel(item.label).slug] += 1
        return counts

    def sort(self) -> "Dataset":
        self.items.sort(key=lambda item: item.source)
        return self


def rgb_to_gray(img: RawImage) -> RawImage:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B), half up. Grayscale
    input passes through unchanged."""
    if img.channels == 1:
        return img
    rgb = img.pixels.astype(np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    gray = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return RawImage(gray)


def resize_bilinear(img: RawImage, out_rows: int = IMAGE_SIZE, out_cols: int = IMAGE_SIZE) -> RawImage:
    """Bilinear resample with half-pixel-centered sampling.

    Source coordinate for output index i is (i + 0.5) * scale - 0.5, clamped
    to the valid range; the interpolated value is rounded half up to 8 bits.
    An identity-scale resize returns the input bit-identically.
    """
    if img.channels != 1:
        raise DimensionError("resize expects a single-channel image")
    rows, cols = img.rows, img.cols
    if (rows, cols) == (out_rows, out_cols):
        return img

    src = img.pixels.astype(np.float64)

    def axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        scale = n_in / n_out
        x = np.clip((np.arange(n_out) + 0.5) * scale - 0.5, 0.0, n_in - 1.0)
        lo = np.floor(x).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, x - lo

    r_lo, r_hi, r_frac = axis_coords(rows, out_rows)
    c_lo, c_hi, c_frac = axis_coords(cols, out_cols)

    top = src[r_lo][:, c_lo] * (1 - c_frac) + src[r_lo][:, c_hi] * c_frac
    bottom = src[r_hi][:, c_lo] * (1 - c_frac) + src[r_hi][:, c_hi] * c_frac
    value = top * (1 - r_frac)[:, None] + bottom * r_frac[:, None]
    out = np.clip(np.floor(value + 0.5), 0, 255).astype(np.uint8)
    return RawImage(out)


def normalize(img: RawImage) -> np.ndarray:
    """Map a 32x32 grayscale image onto a 1x32x32 tensor in [-1, 1]
    (v -> v / 127.5 - 1)."""
    if img.channels != 1 or (img.rows, img.cols) != (IMAGE_SIZE, IMAGE_SIZE):
        raise DimensionError(
            f"normalize expects a single-channel {IMAGE_SIZE}x{IMAGE_SIZE} image, "
            f"got {img.channels} channel(s) {img.rows}x{img.cols}"
        )
    return (img.pixels.astype(np.float64) / 127.5 - 1.0).reshape(1, IMAGE_SIZE, IMAGE_SIZE)


def preprocess(img: RawImage) -> np.ndarray:
    """Full pipeline: grayscale, resize to 32x32, normalize to [-1, 1]."""
    return normalize(resize_bilinear(rgb_to_gray(img)))


def load_dataset(root: str | Path, strict: bool = False) -> Dataset:
    """Load `<root>/<label_slug>/*.{pgm,ppm,png}` into a preprocessed Dataset.

    Subdirectory names must be canonical label slugs; anything else raises
    LabelError listing the valid names. Undecodable files are skipped with a
    warning (or raised, with strict=True). An empty result raises DataError.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} is not a directory")

    items: list[LabeledImage] = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        label = ClassLabel.from_slug(sub.name)
        for path in sorted(sub.iterdir()):
            if not path.is_file() or path.suffix.lower() not in IMAGE_EXTENSIONS:
                continue
            try:
                raw = decode_image(path.read_bytes())
                tensor = preprocess(raw)
            except (DecodeError, DimensionError) as exc:
                if strict:
                    raise DecodeError(f"{path}: {exc}") from exc
                warnings.warn(f"skipping {path}: {exc}", stacklevel=2)
                continue
            items.append(
                LabeledImage(tensor=tensor, label=label, source=str(path.relative_to(root)))
            )
    if not items:
        raise DataError(f"no decodable images found under {root}")
    return Dataset(items).sort()


def split_dataset(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified split: per class, shuffle with a seeded PRNG and send the
    first ceil(fraction * n) samples to the training side.

    Classes are processed in canonical index order, so the split is
    deterministic for a given seed. Both sides come back sorted by source.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train fraction must be in (0, 1), got {train_fraction}")
    by_class: dict[int, list[LabeledImage]] = {}
    for item in dataset:
        by_class.setdefault(int(item.label), []).append(item)

    rng = np.random.Generator(np.random.PCG64(seed))
    train: list[LabeledImage] = []
    test: list[LabeledImage] = []
    for label in sorted(by_class):
        members = by_class[label]
        if len(members) < 2:
            raise DataError(
                f"class {ClassLabel(label).slug} has {len(members)} sample(s); "
                f"need at least 2 to populate both splits"
            )
        order = rng.permutation(len(members))
        cut = math.ceil(train_fraction * len(members))
        train.extend(members[i] for i in order[:cut])
        test.extend(members[i] for i in order[cut:])
    return Dataset(train).sort(), Dataset(test).sort()


def _stripes(rng, horizontal: bool) -> np.ndarray:
    width = int(rng.integers(4, 7))
    phase = int(rng.integers(0, 2 * width))
    lo = int(rng.integers(20, 60))
    hi = int(rng.integers(190, 240))
    idx = np.arange(IMAGE_SIZE)
    band = ((idx + phase) // width) % 2
    line = np.where(band == 0, hi, lo)
    img = np.tile(line[:, None], (1, IMAGE_SIZE)) if horizontal else np.tile(line[None, :], (IMAGE_SIZE, 1))
    return img.astype(np.float64)


def _step_edge(rng) -> np.ndarray:
    edge = int(rng.integers(10, 23))
    top = int(rng.integers(150, 230))
    bottom = int(rng.integers(20, 90))
    img = np.full((IMAGE_SIZE, IMAGE_SIZE), bottom, dtype=np.float64)
    img[:edge, :] = top
    return img


def _diagonal_gradient(rng) -> np.ndarray:
    a = float(rng.integers(10, 60))
    b = float(rng.integers(190, 245))
    if rng.integers(0, 2):
        a, b = b, a
    r = np.arange(IMAGE_SIZE)[:, None]
    c = np.arange(IMAGE_SIZE)[None, :]
    return a + (r + c) / (2.0 * (IMAGE_SIZE - 1)) * (b - a)


def _plaid(rng) -> np.ndarray:
    fr = rng.uniform(2.0, 4.0)
    fc = rng.uniform(2.0, 4.0)
    pr = rng.uniform(0, 2 * np.pi)
    pc = rng.uniform(0, 2 * np.pi)
    amp = rng.uniform(70, 110)
    r = np.arange(IMAGE_SIZE)[:, None] / IMAGE_SIZE
    c = np.arange(IMAGE_SIZE)[None, :] / IMAGE_SIZE
    wave = np.sin(2 * np.pi * fr * r + pr) + np.sin(2 * np.pi * fc * c + pc)
    return 127.5 + amp * wave / 2.0


def _uniform_noise(rng) -> np.ndarray:
    lo = float(rng.integers(0, 40))
    hi = float(rng.integers(215, 256))
    return rng.uniform(lo, hi, size=(IMAGE_SIZE, IMAGE_SIZE))


def _solid_tone(rng) -> np.ndarray:
    tone = float(rng.integers(90, 170))
    return tone + rng.normal(0.0, 2.0, size=(IMAGE_SIZE, IMAGE_SIZE))


def _grid_lines(rng) -> np.ndarray:
    period = int(rng.integers(6, 10))
    phase = int(rng.integers(0, period))
    bg = float(rng.integers(180, 235))
    line = float(rng.integers(10, 60))
    img = np.full((IMAGE_SIZE, IMAGE_SIZE), bg, dtype=np.float64)
    idx = np.arange(IMAGE_SIZE)
    on = (idx + phase) % period == 0
    img[on, :] = line
    img[:, on] = line
    return img


def _checkerboard(rng) -> np.ndarray:
    cell = int(rng.integers(4, 9))
    phase = int(rng.integers(0, cell))
    lo = float(rng.integers(20, 70))
    hi = float(rng.integers(180, 235))
    idx = (np.arange(IMAGE_SIZE) + phase) // cell
    pattern = (idx[:, None] + idx[None, :]) % 2
    return np.where(pattern == 0, hi, lo).astype(np.float64)


def _blobs(rng) -> np.ndarray:
    r = np.arange(IMAGE_SIZE)[:, None] / IMAGE_SIZE
    c = np.arange(IMAGE_SIZE)[None, :] / IMAGE_SIZE
    img = np.zeros((IMAGE_SIZE, IMAGE_SIZE))
    for _ in range(3):
        fr = rng.uniform(0.5, 1.5)
        fc = rng.uniform(0.5, 1.5)
        ph = rng.uniform(0, 2 * np.pi)
        img += np.cos(2 * np.pi * (fr * r + fc * c) + ph)
    img -= img.min()
    if img.max() > 0:
        img /= img.max()
    lo = float(rng.integers(30, 70))
    hi = float(rng.integers(180, 225))
    return lo + img * (hi - lo)


def _radial_gradient(rng) -> np.ndarray:
    center = rng.uniform(12, 20, size=2)
    inner = float(rng.integers(210, 250))
    outer = float(rng.integers(90, 150))
    r = np.arange(IMAGE_SIZE)[:, None]
    c = np.arange(IMAGE_SIZE)[None, :]
    dist = np.sqrt((r - center[0]) ** 2 + (c - center[1]) ** 2)
    return inner + (outer - inner) * np.clip(dist / (IMAGE_SIZE * 0.75), 0, 1)


def _dot_lattice(rng) -> np.ndarray:
    period = int(rng.integers(5, 9))
    phase = int(rng.integers(0, period))
    bg = float(rng.integers(120, 170))
    dot = float(rng.integers(10, 50))
    img = np.full((IMAGE_SIZE, IMAGE_SIZE), bg, dtype=np.float64)
    for r in range(phase, IMAGE_SIZE, period):
        for c in range(phase, IMAGE_SIZE, period):
            img[max(r - 1, 0) : r + 2, max(c - 1, 0) : c + 2] = dot
    return img


_TEXTURE_FAMILIES = {
    ClassLabel.CROSSWALK: lambda rng: _stripes(rng, horizontal=True),
    ClassLabel.CURBS: _step_edge,
    ClassLabel.RAMP: _diagonal_gradient,
    ClassLabel.STAIRS_ASCENDING: lambda rng: _stripes(rng, horizontal=False),
    ClassLabel.STAIRS_DESCENDING: _plaid,
    ClassLabel.GRAVEL: _uniform_noise,
    ClassLabel.CONCRETE: _solid_tone,
    ClassLabel.TILES: _grid_lines,
    ClassLabel.BRICKS: _checkerboard,
    ClassLabel.CARPETS: _blobs,
    ClassLabel.SNOW: _radial_gradient,
    ClassLabel.ROCKS: _dot_lattice,
}


def synth_image(label: ClassLabel, seed: int, index: int) -> np.ndarray:
    """One synthetic 32x32 uint8 texture for (label, index) under `seed`.

    Each sample derives its own PCG64 stream from the master seed and its
    (class, index) coordinates, so generation order does not matter.
    """
    seq = np.random.SeedSequence(seed, spawn_key=(int(label), index))
    rng = np.random.Generator(np.random.PCG64(seq))
    img = _TEXTURE_FAMILIES[label](rng)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def synth_dataset(per_class: int, seed: int) -> Dataset:
    """Deterministic 12-class texture benchmark with per_class samples each."""
    if per_class < 1:
        raise DataError(f"per_class must be >= 1, got {per_class}")
    items = []
    for label in ClassLabel:
        for i in range(per_class):
            pixels = synth_image(label, seed, i)
            items.append(
                LabeledImage(
                    tensor=normalize(RawImage(pixels)),
                    label=label,
                    source=f"synthetic/{label.slug}/{i:04d}",
                )
            )
    return Dataset(items).sort()
