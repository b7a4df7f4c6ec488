"""Benchmark problems: the built-in XOR truth table, delimited-file ingestion
with standardisation and target encoding, deterministic train/test splits,
IDX image loading, and without-replacement batch sampling.

Loaded datasets are immutable and shared freely across concurrent walks.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataFormatError, UsageError
from .network import NetworkSpec, PatternSet

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class RawDataset:
    """Feature matrix plus integer class labels, before encoding."""

    name: str
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DataFormatError("features must be a 2-d array")
        if len(self.features) != len(self.labels):
            raise DataFormatError("feature/label counts differ")
        if self.n_classes < 2:
            raise UsageError("need at least two classes")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= self.n_classes
        ):
            raise DataFormatError("labels out of range")

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class Standardisation:
    """Per-feature mean and standard deviation fitted on a dataset."""

    mean: np.ndarray
    stdev: np.ndarray


@dataclass(frozen=True)
class DatasetSplit:
    """Train/test pattern sets plus the standardisation fitted before splitting."""

    train: PatternSet
    test: PatternSet | None = None
    standardisation: Standardisation | None = None


@dataclass(frozen=True)
class CsvSchema:
    """Column roles for delimited ingestion.

    ``label_column`` and ``drop_columns`` index the columns of the file as
    read (before any dropping); ``class_labels``, when given, pins the label
    vocabulary and its encoding order.
    """

    delimiter: str = ","
    label_column: int = -1
    drop_columns: tuple = ()
    skip_header: int = 0
    class_labels: tuple | None = None


def xor_dataset() -> DatasetSplit:
    """The four exclusive-or patterns; unstandardised and with no test set."""
    features = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    targets = np.array([[0.0], [1.0], [1.0], [0.0]])
    return DatasetSplit(train=PatternSet(features, targets))


def load_csv(path, schema: CsvSchema = CsvSchema(), name: str | None = None) -> RawDataset:
    """Parse a delimited text file into a raw dataset.

    Malformed rows are rejected with their file line numbers.  Label tokens
    may be numeric or symbolic; without a pinned ``class_labels`` vocabulary
    the classes are indexed in sorted token order (numeric when possible).
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"dataset file not found: {path}")
    rows = []
    label_tokens = []
    n_columns = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        for lineno, row in enumerate(reader, start=1):
            if lineno <= schema.skip_header:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if n_columns is None:
                n_columns = len(row)
                for c in (schema.label_column, *schema.drop_columns):
                    if not -n_columns <= c < n_columns:
                        raise UsageError(
                            f"column index {c} out of range for {n_columns} columns"
                        )
                label_idx = schema.label_column % n_columns
                dropped = {c % n_columns for c in schema.drop_columns}
                if label_idx in dropped:
                    raise UsageError("label column is listed in drop_columns")
                feature_idx = [
                    c for c in range(n_columns) if c != label_idx and c not in dropped
                ]
            if len(row) != n_columns:
                raise DataFormatError(
                    f"{path}: line {lineno}: expected {n_columns} columns, got {len(row)}"
                )
            try:
                rows.append([float(row[c]) for c in feature_idx])
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {lineno}: non-numeric feature value"
                ) from None
            label_tokens.append((lineno, row[label_idx].strip()))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")

    if schema.class_labels is not None:
        vocabulary = [str(c) for c in schema.class_labels]
    else:
        unique = sorted(set(token for _, token in label_tokens))
        try:
            unique.sort(key=float)
        except ValueError:
            pass
        vocabulary = unique
    index = {token: i for i, token in enumerate(vocabulary)}
    labels = np.empty(len(label_tokens), dtype=np.int64)
    for i, (lineno, token) in enumerate(label_tokens):
        if token not in index:
            raise DataFormatError(f"{path}: line {lineno}: unknown label {token!r}")
        labels[i] = index[token]
    return RawDataset(
        name=name or path.stem,
        features=np.asarray(rows, dtype=np.float64),
        labels=labels,
        n_classes=len(vocabulary),
    )


def standardise(raw: RawDataset):
    """Centre each feature and scale it to unit variance.

    Zero-variance columns are centred but left unscaled, with their stdev
    recorded as 0.  Returns the transformed dataset and the fitted
    per-feature (mean, stdev).
    """
    if len(raw) < 2:
        raise UsageError("standardisation needs at least two patterns")
    mean = raw.features.mean(axis=0)
    stdev = raw.features.std(axis=0)
    scale = np.where(stdev > 0.0, stdev, 1.0)
    transformed = (raw.features - mean) / scale
    out = RawDataset(raw.name, transformed, raw.labels, raw.n_classes)
    return out, Standardisation(mean=mean, stdev=stdev)


def encode_targets(raw: RawDataset) -> PatternSet:
    """Binary targets for two classes, one-hot targets for more."""
    if raw.n_classes == 2:
        targets = raw.labels.astype(np.float64)[:, None]
    else:
        targets = np.zeros((len(raw), raw.n_classes))
        targets[np.arange(len(raw)), raw.labels] = 1.0
    return PatternSet(raw.features, targets)


def split_dataset(
    patterns: PatternSet,
    fraction: float = 0.8,
    seed: int = 0,
    standardisation: Standardisation | None = None,
) -> DatasetSplit:
    """Deterministic shuffled split into floor(fraction * n) train patterns."""
    n = len(patterns)
    if n < 5:
        raise UsageError(f"need at least 5 patterns to split, got {n}")
    if not 0.0 < fraction < 1.0:
        raise UsageError(f"split fraction must lie in (0, 1), got {fraction}")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    n_train = int(np.floor(fraction * n))
    return DatasetSplit(
        train=patterns.subset(perm[:n_train]),
        test=patterns.subset(perm[n_train:]),
        standardisation=standardisation,
    )


def _read_idx(path, expected_magic, what):
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"{what} file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < 4:
        raise DataFormatError(f"{path}: truncated {what} file")
    magic = struct.unpack(">I", blob[:4])[0]
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    n_dims = magic & 0xFF
    header = 4 + 4 * n_dims
    if len(blob) < header:
        raise DataFormatError(f"{path}: truncated {what} header")
    dims = struct.unpack(f">{n_dims}I", blob[4:header])
    count = int(np.prod(dims))
    body = np.frombuffer(blob, dtype=np.uint8, offset=header)
    if body.size != count:
        raise DataFormatError(
            f"{path}: payload holds {body.size} bytes, header promises {count}"
        )
    return dims, body


def load_mnist_idx(images_path, labels_path) -> RawDataset:
    """Load an IDX image/label pair (big-endian, standard magic numbers).

    Images are flattened to one row per example and scaled to [0, 1];
    standardisation happens later, like every other problem.
    """
    image_dims, pixels = _read_idx(images_path, IDX_IMAGE_MAGIC, "image")
    label_dims, labels = _read_idx(labels_path, IDX_LABEL_MAGIC, "label")
    if len(image_dims) != 3:
        raise DataFormatError(f"{images_path}: expected 3 dimensions, got {len(image_dims)}")
    n, rows, cols = image_dims
    if label_dims[0] != n:
        raise DataFormatError(
            f"image/label count mismatch: {n} images, {label_dims[0]} labels"
        )
    features = pixels.reshape(n, rows * cols).astype(np.float64) / 255.0
    return RawDataset(
        name="mnist",
        features=features,
        labels=labels.astype(np.int64),
        n_classes=10,
    )


class BatchSampler:
    """Draws fixed-size batches without replacement, deterministically.

    Batch ``k`` depends only on ``(seed, k)``, so concurrent walks can pull
    their own batches without shared state.
    """

    def __init__(self, patterns: PatternSet, batch_size: int, seed: int):
        if batch_size < 1:
            raise UsageError("batch_size must be >= 1")
        if batch_size > len(patterns):
            raise UsageError(
                f"batch_size {batch_size} exceeds the {len(patterns)} available patterns"
            )
        self.patterns = patterns
        self.batch_size = batch_size
        self.seed = int(seed)
        self._next = 0

    def batch(self, index: int) -> PatternSet:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(index),))
        rng = np.random.Generator(np.random.PCG64(ss))
        idx = rng.choice(len(self.patterns), size=self.batch_size, replace=False)
        return self.patterns.subset(idx)

    def next_batch(self) -> PatternSet:
        out = self.batch(self._next)
        self._next += 1
        return out


# ---------------------------------------------------------------------------
# benchmark registry


@dataclass(frozen=True)
class Benchmark:
    """A named problem: architecture, data source and ingestion defaults."""

    name: str
    spec: NetworkSpec
    source: str  # "builtin" | "csv" | "idx"
    schema: CsvSchema | None = None
    batch_size: int | None = None


BENCHMARKS = {
    "xor": Benchmark("xor", NetworkSpec(2, 2, 1), "builtin"),
    "iris": Benchmark("iris", NetworkSpec(4, 4, 3), "csv", CsvSchema()),
    "diabetes": Benchmark("diabetes", NetworkSpec(8, 8, 1), "csv", CsvSchema()),
    "glass": Benchmark(
        "glass", NetworkSpec(9, 9, 6), "csv", CsvSchema(drop_columns=(0,))
    ),
    "cancer": Benchmark(
        "cancer", NetworkSpec(30, 10, 1), "csv",
        CsvSchema(label_column=1, drop_columns=(0,)),
    ),
    "heart": Benchmark("heart", NetworkSpec(32, 10, 1), "csv", CsvSchema()),
    "mnist": Benchmark("mnist", NetworkSpec(784, 10, 10), "idx", batch_size=100),
}


def resolve_benchmark(name: str) -> Benchmark:
    try:
        return BENCHMARKS[name.lower()]
    except KeyError:
        raise UsageError(
            f"unknown problem {name!r}; known problems: {', '.join(BENCHMARKS)}"
        ) from None


def _resolve_idx_paths(data):
    if data is None:
        raise UsageError("the mnist problem needs --data (a directory or 'images,labels')")
    if "," in str(data):
        images, labels = (Path(p.strip()) for p in str(data).split(",", 1))
        return images, labels
    root = Path(data)
    if root.is_dir():
        return root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte"
    raise DataFormatError(f"{data}: not a directory or an 'images,labels' pair")


def prepare_problem(
    name: str,
    data=None,
    split_seed: int = 0,
    fraction: float = 0.8,
    schema: CsvSchema | None = None,
):
    """Resolve a benchmark name into its architecture and prepared split.

    Every problem except XOR is standardised on the full dataset (fitted
    before splitting, so all walks sample one fixed landscape), encoded,
    and split deterministically by ``split_seed``.
    """
    bench = resolve_benchmark(name)
    if bench.source == "builtin":
        return bench.spec, xor_dataset()
    if bench.source == "csv":
        if data is None:
            raise UsageError(f"the {bench.name} problem needs --data CSV_FILE")
        raw = load_csv(data, schema or bench.schema or CsvSchema(), name=bench.name)
    else:
        images, labels = _resolve_idx_paths(data)
        raw = load_mnist_idx(images, labels)
    if raw.features.shape[1] != bench.spec.inputs:
        raise DataFormatError(
            f"{bench.name}: file has {raw.features.shape[1]} features, "
            f"the architecture expects {bench.spec.inputs}"
        )
    raw, stz = standardise(raw)
    patterns = encode_targets(raw)
    return bench.spec, split_dataset(patterns, fraction, split_seed, stz)
