"""Dataset ingestion, vectorization, synthetic fixtures and seeded splits.

Supported inputs: IDX binary image/label pairs (big-endian magics
0x00000803 / 0x00000801), CSV with a header row and a "label" column,
and text corpora with one UTF-8 document per line as "label<TAB>text".
Features are always float64, labels int64 in [0, n_classes).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng

_TOKEN = re.compile(r"[a-z0-9]+")


class IdxFormatError(ValueError):
    """Raised for malformed IDX files."""


@dataclass
class Dataset:
    """Feature matrix plus integer labels; immutable after construction."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = "dataset"

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if labels.ndim != 1 or labels.shape[0] != feats.shape[0]:
            raise ValueError("labels must be one per feature row")
        if not np.isfinite(feats).all():
            raise ValueError("features contain non-finite values")
        if self.n_classes < 1:
            raise ValueError("n_classes must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValueError("labels must lie in [0, n_classes)")
        feats.setflags(write=False)
        labels.setflags(write=False)
        self.features = feats
        self.labels = labels

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices, name: str | None = None) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            self.n_classes,
            name or f"{self.name}[{idx.size}]",
        )


def subsample(dataset: Dataset, size: int, seed: int = 0) -> Dataset:
    """Seeded subset without replacement, e.g. for a fixed evaluation
    batch that stays distinct from the test set."""
    if not 1 <= size <= len(dataset):
        raise ValueError(f"subsample size {size} outside [1, {len(dataset)}]")
    idx = rng.stream(seed, rng.SUBSAMPLE).permutation(len(dataset))[:size]
    return dataset.subset(np.sort(idx), name=f"{dataset.name}~{size}")


class Vocabulary:
    """Ordered unique token list; index positions are the feature ids."""

    def __init__(self, tokens):
        tokens = tuple(tokens)
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        self.tokens = tokens
        self._index = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token) -> bool:
        return token in self._index

    def index(self, token: str) -> int | None:
        return self._index.get(token)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return _TOKEN.findall(text.lower())


def _read_exact(f, count: int, what: str) -> bytes:
    blob = f.read(count)
    if len(blob) != count:
        raise IdxFormatError(f"truncated file: expected {count} bytes of {what}")
    return blob


def _read_be32(f, what: str) -> int:
    return int.from_bytes(_read_exact(f, 4, what), "big")


def load_idx(images_path, labels_path) -> Dataset:
    """Load an IDX image/label pair; pixels are scaled into [0, 1] and
    images flattened row-major."""
    with open(images_path, "rb") as f:
        magic = _read_be32(f, "image magic")
        if magic != 0x00000803:
            raise IdxFormatError(f"bad image magic 0x{magic:08x}, expected 0x00000803")
        n = _read_be32(f, "image count")
        rows = _read_be32(f, "row count")
        cols = _read_be32(f, "column count")
        pixels = np.frombuffer(_read_exact(f, n * rows * cols, "pixels"), dtype=np.uint8)
    with open(labels_path, "rb") as f:
        magic = _read_be32(f, "label magic")
        if magic != 0x00000801:
            raise IdxFormatError(f"bad label magic 0x{magic:08x}, expected 0x00000801")
        n_labels = _read_be32(f, "label count")
        labels = np.frombuffer(_read_exact(f, n_labels, "labels"), dtype=np.uint8)
    if n_labels != n:
        raise IdxFormatError(f"{n} images but {n_labels} labels")
    features = pixels.reshape(n, rows * cols).astype(np.float64) / 255.0
    n_classes = int(labels.max()) + 1 if n else 1
    return Dataset(features, labels.astype(np.int64), n_classes, name=Path(images_path).stem)


def load_csv(path) -> Dataset:
    """CSV with a header row; the "label" column holds integer classes and
    every other column a numeric feature."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty CSV")
        if "label" not in header:
            raise ValueError(f"{path}: no 'label' column")
        label_col = header.index("label")
        feats, labels = [], []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row with {len(row)} cells, header has {len(header)}")
            labels.append(int(float(row[label_col])))
            feats.append([float(v) for i, v in enumerate(row) if i != label_col])
    if not feats:
        raise ValueError(f"{path}: no data rows")
    labels = np.asarray(labels, dtype=np.int64)
    return Dataset(np.asarray(feats), labels, int(labels.max()) + 1, name=Path(path).stem)


def load_text_corpus(path) -> tuple[list[int], list[str]]:
    """One document per line: integer label, a tab, then the text."""
    labels, texts = [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            label, sep, text = line.partition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'label<TAB>text'")
            labels.append(int(label))
            texts.append(text)
    if not texts:
        raise ValueError(f"{path}: empty corpus")
    return labels, texts


def vectorize_text(
    corpus,
    vocab_size: int | None = None,
    labels=None,
    vocab: Vocabulary | None = None,
    name: str = "text",
) -> tuple[Vocabulary, Dataset]:
    """Binary term-presence vectors over a document-frequency vocabulary.

    The vocabulary keeps the ``vocab_size`` most document-frequent tokens
    (ties broken lexicographically) and assigns feature indices in
    lexicographic token order; a frozen vocabulary can be passed back in
    to vectorize new text consistently.  Feature i is 1 when token i
    occurs in the document (presence, not counts).
    """
    texts = list(corpus)
    if not texts:
        raise ValueError("empty corpus")
    token_lists = [set(tokenize(t)) for t in texts]
    if vocab is None:
        if vocab_size is None or vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        doc_freq: dict[str, int] = {}
        for toks in token_lists:
            for tok in toks:
                doc_freq[tok] = doc_freq.get(tok, 0) + 1
        ranked = sorted(doc_freq, key=lambda tok: (-doc_freq[tok], tok))
        vocab = Vocabulary(sorted(ranked[:vocab_size]))
    features = np.zeros((len(texts), len(vocab)), dtype=np.float64)
    for row, toks in enumerate(token_lists):
        for tok in toks:
            col = vocab.index(tok)
            if col is not None:
                features[row, col] = 1.0
    if labels is None:
        label_arr = np.zeros(len(texts), dtype=np.int64)
        n_classes = 1
    else:
        label_arr = np.asarray(list(labels), dtype=np.int64)
        n_classes = int(label_arr.max()) + 1
    return vocab, Dataset(features, label_arr, n_classes, name=name)


def make_synthetic(kind: str, n: int, seed: int = 0) -> Dataset:
    """Seeded 2-D fixtures: "blobs" is two unit-variance Gaussians at
    (-2, 0) and (+2, 0); "xor" is four clusters at (+-1, +-1) labelled by
    the XOR of the coordinate signs."""
    if n < 4:
        raise ValueError("need at least 4 instances")
    gen = rng.stream(seed, rng.SYNTHETIC_DATA)
    if kind == "blobs":
        labels = gen.integers(0, 2, size=n)
        centers = np.array([[-2.0, 0.0], [2.0, 0.0]])
        feats = centers[labels] + gen.standard_normal((n, 2))
    elif kind == "xor":
        quadrant = gen.integers(0, 4, size=n)
        centers = np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])
        labels = np.array([0, 1, 1, 0], dtype=np.int64)[quadrant]
        feats = centers[quadrant] + 0.2 * gen.standard_normal((n, 2))
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    return Dataset(feats, labels.astype(np.int64), 2, name=f"{kind}(n={n},seed={seed})")


def split(dataset: Dataset, fractions, seed: int = 0) -> tuple[Dataset, ...]:
    """Disjoint, label-stratified parts in the given proportions.

    Indices are shuffled per class with a seeded stream and allocated by
    largest remainder, so every part holds its fraction of each class to
    within one instance.  Fractions must be positive and sum to at most 1;
    any remainder is discarded.
    """
    fracs = [float(f) for f in fractions]
    if not fracs or any(f <= 0 for f in fracs):
        raise ValueError("fractions must be positive")
    if sum(fracs) > 1.0 + 1e-9:
        raise ValueError(f"fractions sum to {sum(fracs)}, must be <= 1")

    parts: list[list[np.ndarray]] = [[] for _ in fracs]
    for c in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == c)
        idx = idx[rng.stream(seed, rng.SPLIT_CLASS, c).permutation(idx.size)]
        exact = np.array(fracs) * idx.size
        counts = np.floor(exact).astype(int)
        remainder = exact - counts
        # hand out leftover slots to the largest remainders, ties to the
        # earlier part, without exceeding the class total
        short = int(round(exact.sum())) - counts.sum()
        for p in np.lexsort((np.arange(len(fracs)), -remainder))[:short]:
            counts[p] += 1
        start = 0
        for p, count in enumerate(counts):
            parts[p].append(idx[start : start + count])
            start += count

    out = []
    for p, chunks in enumerate(parts):
        merged = np.concatenate(chunks) if chunks else np.array([], dtype=np.int64)
        if merged.size < dataset.n_classes:
            raise ValueError(
                f"part {p} would hold {merged.size} instances, fewer than "
                f"{dataset.n_classes} classes"
            )
        merged = merged[rng.stream(seed, rng.SPLIT_ORDER, p).permutation(merged.size)]
        out.append(dataset.subset(merged, name=f"{dataset.name}/part{p}"))
    return tuple(out)
