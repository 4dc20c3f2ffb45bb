"""Decision-tree format selector: training, cross-validation, deployment.

The classifier is a binary axis-aligned tree grown by greedy recursive
partitioning on min-max-scaled features. At every node the split minimizing
the weighted Gini impurity is chosen over all features and all midpoints of
adjacent observed values; candidate comparisons are carried out in exact
integer arithmetic over class counts, so training is fully deterministic and
ties resolve to the lowest feature index, then the lowest threshold. A node
becomes a leaf when it is pure, the depth limit is reached, either child
would fall below ``min_samples_leaf``, or no split strictly reduces
impurity. Leaves predict their majority class; ties resolve in
:class:`~spmvkit.formats.FormatTag` declaration order.

Scaling parameters are fit on the training samples inside :func:`train_tree`
and stored with the model, so cross-validation refits them per fold and
deployment needs no side channel. Samples therefore carry raw (unscaled)
feature vectors.

Model files are a versioned text format::

    spmvkit-model v1 max_depth <d> min_samples_leaf <m>
    node <id> split <feature> <threshold> <left> <right>
    leaf <id> <label> <c_csr> <c_csr5> <c_ell> <c_sell> <c_hyb>
    scale <feature> <min> <max>

with node 0 the root and floats written as ``repr`` for a bit-exact round
trip.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coo import CooMatrix
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    ScalingParams,
    apply_scaling,
    extract_features,
    fit_scaling,
)
from .formats import FormatMatrix, FormatTag, convert

__all__ = [
    "CvReport",
    "DecisionTreeModel",
    "LabeledSample",
    "ModelIOError",
    "TreeNode",
    "assemble_training_set",
    "cross_validate",
    "load_model",
    "predict",
    "save_model",
    "select_format",
    "train_tree",
]

log = logging.getLogger(__name__)

CLASSES = list(FormatTag)
N_CLASSES = len(CLASSES)
N_FEATURES = len(FEATURE_NAMES)


class ModelIOError(ValueError):
    """A model file could not be parsed or fails structural validation."""


@dataclass
class LabeledSample:
    matrix_id: str
    features: FeatureVector
    label: FormatTag


@dataclass
class TreeNode:
    """Internal node (feature >= 0) or leaf (feature == -1)."""

    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    label: FormatTag | None = None
    counts: tuple[int, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class DecisionTreeModel:
    nodes: list[TreeNode]
    max_depth: int
    min_samples_leaf: int
    scaling: ScalingParams


@dataclass
class CvReport:
    fold_accuracies: list[float]
    fold_perf_ratios: list[float] | None
    confusion: np.ndarray  # confusion[true, predicted]

    @property
    def accuracy(self) -> float:
        total = int(self.confusion.sum())
        return float(np.trace(self.confusion)) / total if total else 0.0

    @property
    def mean_perf_ratio(self) -> float | None:
        if not self.fold_perf_ratios:
            return None
        return float(np.mean(self.fold_perf_ratios))


def _find_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray, min_leaf: int):
    """Best (feature, threshold) by exact weighted-Gini comparison, or None.

    Minimizing the weighted Gini over a fixed node is equivalent to
    maximizing (SL/nL + SR/nR) where S is the sum of squared class counts of
    a side; candidates are compared as exact integer fractions.
    """
    n = idx.size
    total = np.bincount(y[idx], minlength=N_CLASSES)
    parent_sq = sum(int(c) * int(c) for c in total)
    best = None  # (num, den, feature, threshold)
    for f in range(N_FEATURES):
        col = X[idx, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        ys = y[idx[order]]
        cum = np.zeros((n, N_CLASSES), dtype=np.int64)
        cum[np.arange(n), ys] = 1
        np.cumsum(cum, axis=0, out=cum)
        for b in np.flatnonzero(xs[1:] != xs[:-1]):
            v1, v2 = xs[b], xs[b + 1]
            t = (v1 + v2) / 2.0
            if not (v1 <= t < v2):  # midpoint rounded onto v2: degenerate
                continue
            n_left = int(b) + 1
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            left = cum[b]
            sq_left = sum(int(c) * int(c) for c in left)
            sq_right = sum(
                int(total[c] - left[c]) ** 2 for c in range(N_CLASSES)
            )
            num = sq_left * n_right + sq_right * n_left
            den = n_left * n_right
            if best is None or num * best[1] > best[0] * den:
                best = (num, den, f, float(t))
    if best is None:
        return None
    num, den, f, t = best
    if num * n <= parent_sq * den:  # no strict impurity decrease
        return None
    return f, t


def train_tree(
    samples: list[LabeledSample],
    max_depth: int = 8,
    min_samples_leaf: int = 3,
) -> DecisionTreeModel:
    """Fit scaling on the given samples, then grow the tree on scaled features."""
    if not samples:
        raise ValueError("cannot train on an empty sample list")
    if max_depth < 0 or min_samples_leaf < 1:
        raise ValueError(
            f"bad hyperparameters max_depth={max_depth}, "
            f"min_samples_leaf={min_samples_leaf}"
        )
    scaling = fit_scaling([s.features for s in samples])
    X = np.stack([apply_scaling(s.features, scaling) for s in samples])
    y = np.array([CLASSES.index(s.label) for s in samples], dtype=np.int64)
    nodes: list[TreeNode] = []

    def build(idx: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nodes.append(TreeNode())
        counts = np.bincount(y[idx], minlength=N_CLASSES)
        split = None
        if (
            depth < max_depth
            and idx.size >= 2 * min_samples_leaf
            and int((counts > 0).sum()) > 1
        ):
            split = _find_split(X, y, idx, min_samples_leaf)
        if split is None:
            nodes[node_id] = TreeNode(
                label=CLASSES[int(np.argmax(counts))],
                counts=tuple(int(c) for c in counts),
            )
            return node_id
        f, t = split
        go_left = X[idx, f] <= t
        left_id = build(idx[go_left], depth + 1)
        right_id = build(idx[~go_left], depth + 1)
        nodes[node_id] = TreeNode(feature=f, threshold=t, left=left_id, right=right_id)
        return node_id

    build(np.arange(len(samples)), 0)
    return DecisionTreeModel(nodes, max_depth, min_samples_leaf, scaling)


def predict(model: DecisionTreeModel, f: FeatureVector) -> FormatTag:
    """Scale (with clamping) and descend; total over all feature vectors."""
    vec = apply_scaling(f, model.scaling)
    node = model.nodes[0]
    while not node.is_leaf:
        node = model.nodes[node.left if vec[node.feature] <= node.threshold else node.right]
    assert node.label is not None
    return node.label


def assemble_training_set(
    labels: dict[str, FormatTag],
    features: list[tuple[str, FeatureVector]],
) -> tuple[list[LabeledSample], ScalingParams, list[str]]:
    """Join best-format labels with features on matrix id.

    Ids present on one side only are reported (and logged), not fatal.
    The returned scaling covers the joined samples; per-fold refits happen
    inside :func:`train_tree`.
    """
    problems = []
    samples = []
    seen = set()
    for matrix_id, fv in features:
        seen.add(matrix_id)
        label = labels.get(matrix_id)
        if label is None:
            problems.append(f"{matrix_id}: features but no benchmark label")
            continue
        samples.append(LabeledSample(matrix_id, fv, label))
    for matrix_id in labels:
        if matrix_id not in seen:
            problems.append(f"{matrix_id}: benchmark label but no features")
    for message in problems:
        log.warning("%s", message)
    if not samples:
        return [], ScalingParams(np.zeros(N_FEATURES), np.zeros(N_FEATURES)), problems
    return samples, fit_scaling([s.features for s in samples]), problems


def cross_validate(
    samples: list[LabeledSample],
    k: int = 5,
    seed: int = 0,
    *,
    repeats: int = 1,
    times: dict[str, dict[FormatTag, float]] | None = None,
    max_depth: int = 8,
    min_samples_leaf: int = 3,
) -> CvReport:
    """Seeded k-fold cross-validation; folds partition the data per repeat.

    With ``times`` (per-matrix per-format mean runtimes) each fold also gets
    a performance ratio: mean over test matrices of best time over the
    predicted format's time (0 when the predicted format has no runtime).
    """
    n = len(samples)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} available samples")
    rng = np.random.default_rng(seed)
    fold_acc: list[float] = []
    fold_ratio: list[float] = []
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for _ in range(repeats):
        perm = rng.permutation(n)
        for fold in np.array_split(perm, k):
            test = set(int(i) for i in fold)
            train = [samples[i] for i in range(n) if i not in test]
            model = train_tree(train, max_depth, min_samples_leaf)
            hits = 0
            ratios = []
            for i in sorted(test):
                s = samples[i]
                got = predict(model, s.features)
                confusion[CLASSES.index(s.label), CLASSES.index(got)] += 1
                hits += got is s.label
                if times is not None and s.matrix_id in times:
                    per_format = times[s.matrix_id]
                    best = min(per_format.values())
                    got_time = per_format.get(got)
                    ratios.append(best / got_time if got_time else 0.0)
            fold_acc.append(hits / len(fold))
            if ratios:
                fold_ratio.append(float(np.mean(ratios)))
    return CvReport(fold_acc, fold_ratio if times is not None else None, confusion)


def select_format(
    a: CooMatrix,
    model: DecisionTreeModel,
    *,
    omega: int = 4,
    sigma: int = 16,
    sell_c: int = 4,
    sell_sigma: int = 0,
) -> tuple[FormatTag, FormatMatrix]:
    """Extract features, predict the format, and hand back the converted matrix."""
    tag = predict(model, extract_features(a))
    m = convert(
        tag, a, omega=omega, sigma=sigma, sell_c=sell_c, sell_sigma=sell_sigma
    )
    return tag, m


def save_model(model: DecisionTreeModel, dest) -> None:
    lines = [
        f"spmvkit-model v1 max_depth {model.max_depth} "
        f"min_samples_leaf {model.min_samples_leaf}"
    ]
    for node_id, node in enumerate(model.nodes):
        if node.is_leaf:
            counts = " ".join(str(c) for c in node.counts)
            lines.append(f"leaf {node_id} {node.label.value} {counts}")
        else:
            lines.append(
                f"node {node_id} split {node.feature} {node.threshold!r} "
                f"{node.left} {node.right}"
            )
    for f in range(N_FEATURES):
        lines.append(
            f"scale {f} {model.scaling.mins[f]!r} {model.scaling.maxs[f]!r}"
        )
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def _validate_tree(nodes: dict[int, TreeNode]) -> list[TreeNode]:
    if 0 not in nodes:
        raise ModelIOError("model has no root node 0")
    ordered = []
    for node_id in range(len(nodes)):
        if node_id not in nodes:
            raise ModelIOError(f"node ids are not contiguous: missing {node_id}")
        ordered.append(nodes[node_id])
    seen: set[int] = set()
    stack = [0]
    while stack:
        node_id = stack.pop()
        if node_id in seen:
            raise ModelIOError(f"node {node_id} is reachable twice")
        seen.add(node_id)
        node = ordered[node_id]
        if not node.is_leaf:
            for child in (node.left, node.right):
                if not 0 <= child < len(ordered):
                    raise ModelIOError(f"node {node_id} points at missing child {child}")
                stack.append(child)
    if len(seen) != len(ordered):
        raise ModelIOError("model contains unreachable nodes")
    return ordered


def load_model(source) -> DecisionTreeModel:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ModelIOError("empty model file")
    header = lines[0].split()
    if (
        len(header) != 6
        or header[:2] != ["spmvkit-model", "v1"]
        or header[2] != "max_depth"
        or header[4] != "min_samples_leaf"
    ):
        raise ModelIOError(f"bad model header {lines[0]!r}")
    try:
        max_depth = int(header[3])
        min_leaf = int(header[5])
    except ValueError:
        raise ModelIOError(f"bad model header {lines[0]!r}") from None

    nodes: dict[int, TreeNode] = {}
    mins = np.full(N_FEATURES, np.nan)
    maxs = np.full(N_FEATURES, np.nan)
    for line in lines[1:]:
        toks = line.split()
        try:
            if toks[0] == "node" and len(toks) == 7 and toks[2] == "split":
                nodes[int(toks[1])] = TreeNode(
                    feature=int(toks[3]),
                    threshold=float(toks[4]),
                    left=int(toks[5]),
                    right=int(toks[6]),
                )
            elif toks[0] == "leaf" and len(toks) == 3 + N_CLASSES:
                nodes[int(toks[1])] = TreeNode(
                    label=FormatTag(toks[2]),
                    counts=tuple(int(c) for c in toks[3:]),
                )
            elif toks[0] == "scale" and len(toks) == 4:
                f = int(toks[1])
                if not 0 <= f < N_FEATURES:
                    raise ValueError(f"feature index {f}")
                mins[f] = float(toks[2])
                maxs[f] = float(toks[3])
            else:
                raise ValueError("unrecognized line")
        except ValueError as exc:
            raise ModelIOError(f"bad model line {line!r}: {exc}") from None
    if np.isnan(mins).any() or np.isnan(maxs).any():
        raise ModelIOError("model file is missing scale lines")
    for node in nodes.values():
        if not node.is_leaf and not 0 <= node.feature < N_FEATURES:
            raise ModelIOError(f"split on unknown feature {node.feature}")
    return DecisionTreeModel(
        _validate_tree(nodes), max_depth, min_leaf, ScalingParams(mins, maxs)
    )
