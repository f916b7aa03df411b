"""Stroke-count routing: group table, router, multi-model training and the
averaged four-model evaluation.

A character's group id equals the number of strokes needed to write it; a
character writable in several ways (dots drawn separately or merged) belongs
to every matching group, so the groups overlap: Sheen sits in groups 2 and 4,
and the four group sizes are 13, 16, 4, and 2 (35 memberships over 29
classes).

Offline samples carry no stroke counts, so group membership at training and
evaluation time is derived from the true class; live stroke counts only
arrive through the service/UI path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import model
from .data import HIJJA_LABELS, Dataset, LabelMap, filter_by_classes
from .metrics import ClassificationReport, confusion, report

MULTI_MAGIC = b"QLMB"
MULTI_VERSION = 1

GROUP_TABLE_VERSION = 1
GROUPS: dict[int, tuple[str, ...]] = {
    1: ("alef", "hah", "dal", "reh", "seen", "sad", "tah",
        "ain", "lam", "meem", "heh", "waw", "hamza"),
    2: ("beh", "teh", "theh", "jeem", "khah", "thal", "zain", "sheen",
        "dad", "zah", "ghain", "feh", "qaf", "kaf", "noon", "yeh"),
    3: ("teh", "zah", "qaf", "yeh"),
    4: ("theh", "sheen"),
}


class RoutingError(ValueError):
    """Stroke count outside the group table."""


def route(strokes: int) -> tuple[int, tuple[str, ...]]:
    """Map a live stroke count to (group id, that group's class names)."""
    if not isinstance(strokes, (int, np.integer)) or isinstance(strokes, bool):
        raise RoutingError(f"stroke count must be an integer, got {strokes!r}")
    if strokes not in GROUPS:
        raise RoutingError(
            f"no group for {strokes} strokes; valid stroke counts are 1-4")
    return int(strokes), GROUPS[strokes]


def groups_of(class_name: str) -> tuple[int, ...]:
    """Every group id containing the class (classes may repeat across groups)."""
    found = tuple(g for g, names in GROUPS.items() if class_name in names)
    if not found:
        raise RoutingError(f"class {class_name!r} is in no stroke group")
    return found


def render_groups() -> str:
    """Human-readable group table."""
    lines = []
    for g, names in sorted(GROUPS.items()):
        display = ", ".join(HIJJA_LABELS.display(HIJJA_LABELS.index_of(n)) for n in names)
        lines.append(f"group {g} ({g} stroke{'s' if g > 1 else ''}, "
                     f"{len(names)} classes): {display}")
    return "\n".join(lines)


@dataclass
class MultiModelBundle:
    """One trained network per stroke group; immutable after training."""

    models: dict[int, model.TrainedBundle]

    def __post_init__(self):
        for g, names in GROUPS.items():
            if g not in self.models:
                raise ValueError(f"missing model for group {g}")
            b = self.models[g]
            if b.config.classes != len(names):
                raise ValueError(
                    f"group {g} model has {b.config.classes} outputs, "
                    f"expected {len(names)}")
            if b.label_names != names:
                raise ValueError(f"group {g} model labels do not match the table")


def train_multi(data: Dataset, tcfg: model.TrainConfig,
                ncfg: model.NetworkConfig, log=None) -> MultiModelBundle:
    """Train one network per group on that group's class-filtered slice.

    Classes in several groups contribute their samples to each; every group
    reuses the shared TrainConfig and the base architecture with the output
    width swapped.
    """
    if data.label_map.names != HIJJA_LABELS.names:
        raise ValueError("multi-model training expects the 29-class label map")
    models = {}
    for g, names in sorted(GROUPS.items()):
        subset = filter_by_classes(data, names)
        if len(subset) == 0:
            raise ValueError(f"group {g} has no samples in the dataset")
        if log:
            log(f"group {g}: {len(subset)} samples over {len(names)} classes")
        gcfg = replace(ncfg, classes=len(names))
        models[g] = model.train(subset, tcfg, gcfg, log=log)
    return MultiModelBundle(models)


class MultiPrediction(NamedTuple):
    group: int
    label: str                      # global class name
    label_index: int                # index in the 29-class map
    classes: tuple[str, ...]        # the routed group's classes
    probabilities: np.ndarray       # over ``classes``


def predict_multi(bundle: MultiModelBundle, image: np.ndarray,
                  strokes: int) -> MultiPrediction:
    """Route on the stroke count, then predict within that group only."""
    g, names = route(strokes)
    local, probs = model.predict(bundle.models[g].network, image)
    label = names[local]
    return MultiPrediction(g, label, HIJJA_LABELS.index_of(label), names, probs)


@dataclass
class MultiEvaluation:
    reports: dict[int, ClassificationReport]
    group_accuracies: dict[int, float]
    averaged_accuracy: float        # unweighted mean over the 4 groups
    weighted_accuracy: float        # support-weighted, for transparency


def evaluate_multi(bundle: MultiModelBundle, test: Dataset,
                   batch: int = 256) -> MultiEvaluation:
    """Score each group model on the test samples whose true class it serves,
    then average the four accuracies."""
    if test.label_map.names != HIJJA_LABELS.names:
        raise ValueError("multi-model evaluation expects the 29-class label map")
    reports, accs, supports = {}, {}, {}
    for g, names in sorted(GROUPS.items()):
        subset = filter_by_classes(test, names)
        if len(subset) == 0:
            raise ValueError(f"group {g} has no test samples")
        x = (subset.pixels.astype(np.float32) / 255.0)[..., None]
        probs = bundle.models[g].network.predict_proba(x, batch=batch)
        preds = probs.argmax(axis=1)
        cm = confusion(subset.labels, preds, len(names))
        reports[g] = report(cm, subset.label_map)
        accs[g] = reports[g].accuracy
        supports[g] = len(subset)
    total = sum(supports.values())
    return MultiEvaluation(
        reports=reports,
        group_accuracies=accs,
        averaged_accuracy=float(np.mean(list(accs.values()))),
        weighted_accuracy=float(sum(accs[g] * supports[g] for g in accs) / total),
    )


def save_multi(bundle: MultiModelBundle, path):
    """Container format: magic, version u16, count u16, then per group a
    u16 group id and u64-length-prefixed single-model blob."""
    with open(path, "wb") as f:
        f.write(MULTI_MAGIC)
        f.write(struct.pack("<HH", MULTI_VERSION, len(bundle.models)))
        for g in sorted(bundle.models):
            blob = model.dump_bytes(bundle.models[g])
            f.write(struct.pack("<HQ", g, len(blob)))
            f.write(blob)


def load_multi(path) -> MultiModelBundle:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MULTI_MAGIC:
        raise model.SerializationError(f"bad magic {blob[:4]!r}, not a multi-model file")
    if len(blob) < 8:
        raise model.SerializationError("truncated header")
    version, count = struct.unpack_from("<HH", blob, 4)
    if version != MULTI_VERSION:
        raise model.SerializationError(f"unsupported multi-model version {version}")
    offset, models = 8, {}
    for _ in range(count):
        if offset + 10 > len(blob):
            raise model.SerializationError("truncated group entry")
        g, length = struct.unpack_from("<HQ", blob, offset)
        offset += 10
        if offset + length > len(blob):
            raise model.SerializationError(f"truncated model blob for group {g}")
        models[g] = model.from_bytes(blob[offset:offset + length])
        offset += length
    if offset != len(blob):
        raise model.SerializationError("trailing bytes after last group model")
    return MultiModelBundle(models)
