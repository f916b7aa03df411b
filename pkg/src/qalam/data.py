"""Dataset ingestion, preprocessing, merging, label maps, and fold splitting.

Canonical CSV layout: one sample per row, first field the label index, then
1024 row-major pixel values in 0-255. Pixels stay 8-bit integers until
``normalize_for_training`` so color inversion is unambiguous.

The canonical label order is the 29-class children's-handwriting order
(Alif ... Hamza). The 28-class adult set is the same order minus Hamza, so
merging re-indexes by class name. Each class has a unique ASCII key plus the
transliteration and Arabic glyph used for display.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

IMAGE_SIZE = 32
PIXELS = IMAGE_SIZE * IMAGE_SIZE


class CsvFormatError(ValueError):
    """Malformed dataset CSV; message names the offending row."""


class DatasetError(ValueError):
    """Semantically invalid dataset operation."""


class CharClass(NamedTuple):
    key: str        # unique ASCII identifier
    translit: str   # transliteration as printed in reports
    glyph: str      # Arabic letter


ARABIC_CLASSES: tuple[CharClass, ...] = (
    CharClass("alef", "Alif", "ا"),
    CharClass("beh", "Baa'", "ب"),
    CharClass("teh", "Taa'", "ت"),
    CharClass("theh", "Thaa'", "ث"),
    CharClass("jeem", "Jiim", "ج"),
    CharClass("hah", "Haa'", "ح"),
    CharClass("khah", "Khaa'", "خ"),
    CharClass("dal", "Daal", "د"),
    CharClass("thal", "Dhaal", "ذ"),
    CharClass("reh", "Raa'", "ر"),
    CharClass("zain", "Zaay", "ز"),
    CharClass("seen", "Seen", "س"),
    CharClass("sheen", "Sheen", "ش"),
    CharClass("sad", "Saad", "ص"),
    CharClass("dad", "Daad", "ض"),
    CharClass("tah", "Taa'", "ط"),
    CharClass("zah", "Zaa'", "ظ"),
    CharClass("ain", "Aayn", "ع"),
    CharClass("ghain", "Ghayn", "غ"),
    CharClass("feh", "Faa'", "ف"),
    CharClass("qaf", "Qaaf", "ق"),
    CharClass("kaf", "Kaff", "ك"),
    CharClass("lam", "Lamm", "ل"),
    CharClass("meem", "Miim", "م"),
    CharClass("noon", "Nuun", "ن"),
    CharClass("heh", "Haa'", "ه"),
    CharClass("waw", "Waaw", "و"),
    CharClass("yeh", "Yaa'", "ي"),
    CharClass("hamza", "Hamza", "ء"),
)

_CLASS_BY_KEY = {c.key: c for c in ARABIC_CLASSES}


@dataclass(frozen=True)
class LabelMap:
    """Ordered, unique class names; index <-> name bijection."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DatasetError("class names must be unique")
        if not self.names:
            raise DatasetError("label map must not be empty")

    def __len__(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DatasetError(f"unknown class name: {name}") from None

    def display(self, index: int) -> str:
        """Transliteration plus Arabic glyph where known, else the raw name."""
        name = self.names[index]
        cls = _CLASS_BY_KEY.get(name)
        return f"{cls.translit} {cls.glyph}" if cls else name


HIJJA_LABELS = LabelMap(tuple(c.key for c in ARABIC_CLASSES))          # 29 classes
AHCD_LABELS = LabelMap(tuple(c.key for c in ARABIC_CLASSES[:28]))     # no Hamza


class Sample(NamedTuple):
    pixels: np.ndarray  # [32, 32] uint8
    label: int


@dataclass
class Dataset:
    """An ordered labelled image collection. Immutable by convention."""

    pixels: np.ndarray          # [n, 32, 32] uint8
    labels: np.ndarray          # [n] int64
    label_map: LabelMap
    provenance: str = "unknown"

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE):
            raise DatasetError(f"pixels must be [n,{IMAGE_SIZE},{IMAGE_SIZE}], got {self.pixels.shape}")
        if self.labels.shape != (self.pixels.shape[0],):
            raise DatasetError("labels must align with pixels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.label_map)):
            raise DatasetError("label index outside the label map")

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.pixels[i], int(self.labels[i]))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(self.label_map))


def load_csv(path, *, transpose: bool = False, has_header: bool = False,
             label_map: LabelMap = HIJJA_LABELS, provenance: str = "unknown") -> Dataset:
    """Read a canonical CSV. ``transpose`` applies the orientation fix to
    every image (the adult-written set ships with rows and columns swapped)."""
    pixels, labels = [], []
    k = len(label_map)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for row_no, row in enumerate(reader, start=1):
            if has_header and row_no == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != PIXELS + 1:
                raise CsvFormatError(f"row {row_no}: expected {PIXELS + 1} fields, got {len(row)}")
            try:
                values = [int(v) for v in row]
            except ValueError as exc:
                raise CsvFormatError(f"row {row_no}: non-integer field ({exc})") from None
            label = values[0]
            if not 0 <= label < k:
                raise CsvFormatError(f"row {row_no}: unknown label index {label}")
            img = np.array(values[1:], dtype=np.int64)
            if img.min() < 0 or img.max() > 255:
                raise CsvFormatError(f"row {row_no}: pixel value out of 0-255")
            img = img.reshape(IMAGE_SIZE, IMAGE_SIZE).astype(np.uint8)
            if transpose:
                img = np.ascontiguousarray(img.T)
            pixels.append(img)
            labels.append(label)
    if not pixels:
        return Dataset(np.zeros((0, IMAGE_SIZE, IMAGE_SIZE), np.uint8),
                       np.zeros(0, np.int64), label_map, provenance)
    return Dataset(np.stack(pixels), np.array(labels, dtype=np.int64), label_map, provenance)


def write_csv(ds: Dataset, path):
    """Write the canonical layout: label, then 1024 row-major pixels."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for i in range(len(ds)):
            writer.writerow([int(ds.labels[i]), *ds.pixels[i].reshape(-1).tolist()])


def invert(ds: Dataset) -> Dataset:
    """Map every pixel p -> 255 - p (white foreground on black background)."""
    return Dataset(255 - ds.pixels, ds.labels.copy(), ds.label_map, ds.provenance)


def merge(a: Dataset, b: Dataset) -> Dataset:
    """Concatenate two collections under the 29-class map, re-indexing the
    second operand's labels by class name."""
    target = HIJJA_LABELS

    def remap(ds: Dataset) -> np.ndarray:
        if ds.label_map.names == target.names:
            return ds.labels
        lut = np.array([target.index_of(n) for n in ds.label_map.names], dtype=np.int64)
        return lut[ds.labels]

    pixels = np.concatenate([a.pixels, b.pixels]) if len(a) and len(b) else \
        (a.pixels if len(a) else b.pixels)
    labels = np.concatenate([remap(a), remap(b)])
    return Dataset(pixels.copy(), labels, target, "merged")


def normalize_for_training(ds: Dataset, classes: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Pixels scaled to [0,1] as [n,32,32,1] float32, labels one-hot encoded."""
    k = classes if classes is not None else len(ds.label_map)
    x = (ds.pixels.astype(np.float32) / 255.0)[..., None]
    y = np.zeros((len(ds), k), dtype=np.float32)
    y[np.arange(len(ds)), ds.labels] = 1.0
    return x, y


@dataclass
class FoldPlan:
    """Stratified fold assignment: per class, fold sizes differ by at most 1."""

    fold_of: np.ndarray  # [n] fold id per sample
    k: int
    seed: int

    def val_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


def stratified_kfold(ds: Dataset, k: int = 5, seed: int = 0) -> FoldPlan:
    """Shuffled per-class assignment into k folds."""
    if k < 2:
        raise DatasetError(f"need k >= 2 folds, got {k}")
    if len(set(ds.labels.tolist())) < 2:
        raise DatasetError("stratification needs at least 2 classes present")
    rng = np.random.default_rng(seed)
    fold_of = np.full(len(ds), -1, dtype=np.int64)
    for cls in range(len(ds.label_map)):
        idx = np.flatnonzero(ds.labels == cls)
        if len(idx) == 0:
            continue
        if len(idx) < k:
            raise DatasetError(
                f"class {ds.label_map.names[cls]} has {len(idx)} samples, fewer than {k} folds")
        rng.shuffle(idx)
        for fold, chunk in enumerate(np.array_split(idx, k)):
            fold_of[chunk] = fold
    return FoldPlan(fold_of, k, seed)


def filter_by_classes(ds: Dataset, classes: Iterable[str]) -> Dataset:
    """Keep samples whose class is listed, re-indexed to a compact label map
    that preserves the given order."""
    names = tuple(classes)
    if not names:
        raise DatasetError("class filter must not be empty")
    sub_map = LabelMap(names)
    source_idx = np.array([ds.label_map.index_of(n) for n in names], dtype=np.int64)
    lut = np.full(len(ds.label_map), -1, dtype=np.int64)
    lut[source_idx] = np.arange(len(names))
    keep = lut[ds.labels] >= 0
    return Dataset(ds.pixels[keep].copy(), lut[ds.labels[keep]], sub_map, ds.provenance)


def split_holdout(ds: Dataset, fraction: float = 0.1, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified holdout split; returns (train, held_out)."""
    if not 0.0 < fraction < 1.0:
        raise DatasetError(f"fraction must be in (0,1), got {fraction}")
    rng = np.random.default_rng(seed)
    test_mask = np.zeros(len(ds), dtype=bool)
    for cls in range(len(ds.label_map)):
        idx = np.flatnonzero(ds.labels == cls)
        if len(idx) == 0:
            continue
        rng.shuffle(idx)
        n_test = max(1, round(len(idx) * fraction)) if len(idx) > 1 else 0
        test_mask[idx[:n_test]] = True
    train = Dataset(ds.pixels[~test_mask].copy(), ds.labels[~test_mask].copy(),
                    ds.label_map, ds.provenance)
    test = Dataset(ds.pixels[test_mask].copy(), ds.labels[test_mask].copy(),
                   ds.label_map, f"{ds.provenance}-holdout")
    return train, test


# ---------------------------------------------------------------------------
# Synthetic glyph set: eight programmatically rendered shapes, learnable by
# construction, used for desk-scale training checks.
# ---------------------------------------------------------------------------

GLYPH_NAMES = ("disk", "ring", "vbar", "hbar", "cross", "diag", "corner", "dots")
GLYPH_LABELS = LabelMap(GLYPH_NAMES)


def _render_glyph(name: str, rng: np.random.Generator) -> np.ndarray:
    img = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=np.float64)
    yy, xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE]
    cy = 16 + rng.integers(-3, 4)
    cx = 16 + rng.integers(-3, 4)
    r2 = (yy - cy) ** 2 + (xx - cx) ** 2

    if name == "disk":
        img[r2 <= rng.integers(6, 10) ** 2] = 1.0
    elif name == "ring":
        outer = rng.integers(9, 12)
        img[(r2 <= outer ** 2) & (r2 >= (outer - 3) ** 2)] = 1.0
    elif name == "vbar":
        half = rng.integers(1, 3)
        img[4:28, cx - half:cx + half + 1] = 1.0
    elif name == "hbar":
        half = rng.integers(1, 3)
        img[cy - half:cy + half + 1, 4:28] = 1.0
    elif name == "cross":
        half = rng.integers(1, 3)
        img[4:28, cx - half:cx + half + 1] = 1.0
        img[cy - half:cy + half + 1, 4:28] = 1.0
    elif name == "diag":
        width = rng.integers(2, 4)
        img[np.abs((yy - cy) - (xx - cx)) <= width] = 1.0
        img[r2 > 14 ** 2] = 0.0
    elif name == "corner":
        half = rng.integers(1, 3)
        img[6:26, 6 + cx - 16 - half:6 + cx - 16 + half + 1] = 1.0
        img[24 + cy - 16 - half:24 + cy - 16 + half + 1, 6:26] = 1.0
    elif name == "dots":
        for dy in (-6, 6):
            for dx in (-6, 6):
                d2 = (yy - cy - dy) ** 2 + (xx - cx - dx) ** 2
                img[d2 <= 3 ** 2] = 1.0
    else:
        raise DatasetError(f"unknown glyph: {name}")

    intensity = rng.uniform(0.75, 1.0)
    noise = rng.normal(0.0, 0.05, img.shape)
    pixels = np.clip(img * intensity + noise, 0.0, 1.0)
    return (pixels * 255).astype(np.uint8)


def synthetic_glyphs(per_class: int = 200, seed: int = 0) -> Dataset:
    """White-on-black glyph dataset with ``per_class`` noisy renders of each
    of the 8 shapes."""
    rng = np.random.default_rng(seed)
    pixels, labels = [], []
    for label, name in enumerate(GLYPH_NAMES):
        for _ in range(per_class):
            pixels.append(_render_glyph(name, rng))
            labels.append(label)
    return Dataset(np.stack(pixels), np.array(labels, dtype=np.int64),
                   GLYPH_LABELS, "synthetic")
