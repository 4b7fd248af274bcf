"""GZSL datasets: class catalogs, splits, standardization, synthetic data and
the binary ``.gzsl`` container.

Feature matrices are numpy arrays of shape ``(n, d)``: one row per datapoint.
Stored features and attributes are float32 so that container round-trips are
bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPLIT_NAMES = ("train_seen", "aux_unseen", "test_seen", "test_unseen")
STD_FLOOR = 1e-8

CONTAINER_MAGIC = b"GZSL"
CONTAINER_VERSION = 1


class DatasetError(ValueError):
    """Invalid dataset contents or arguments."""


class ContainerError(DatasetError):
    code = "container"


class BadMagicError(ContainerError):
    code = "bad_magic"


class VersionMismatchError(ContainerError):
    code = "version_mismatch"


class TruncatedError(ContainerError):
    code = "truncated"


class SplitLabelError(ContainerError):
    """A split carries labels outside its side of the catalog."""

    code = "split_label_violation"


@dataclass(frozen=True)
class ClassCatalog:
    seen_ids: tuple[int, ...]
    unseen_ids: tuple[int, ...]

    def __post_init__(self):
        seen = tuple(sorted(int(c) for c in self.seen_ids))
        unseen = tuple(sorted(int(c) for c in self.unseen_ids))
        if len(set(seen)) != len(seen) or len(set(unseen)) != len(unseen):
            raise DatasetError("duplicate class id in catalog")
        if set(seen) & set(unseen):
            raise DatasetError("seen and unseen class ids overlap")
        if any(c < 0 or c > 0xFFFFFFFF for c in seen + unseen):
            raise DatasetError("class ids must fit in u32")
        object.__setattr__(self, "seen_ids", seen)
        object.__setattr__(self, "unseen_ids", unseen)

    @property
    def all_ids(self) -> tuple[int, ...]:
        return self.seen_ids + self.unseen_ids

    @property
    def n_seen(self) -> int:
        return len(self.seen_ids)

    @property
    def n_unseen(self) -> int:
        return len(self.unseen_ids)

    def __len__(self) -> int:
        return self.n_seen + self.n_unseen

    def index_of(self, ids) -> np.ndarray:
        """Positions of ``ids`` in ``all_ids``; raises on unknown ids."""
        lookup = {c: i for i, c in enumerate(self.all_ids)}
        try:
            return np.array([lookup[int(c)] for c in np.ravel(ids)], dtype=np.intp)
        except KeyError as exc:
            raise DatasetError(f"unknown class id {exc.args[0]}") from None


@dataclass(frozen=True)
class Split:
    features: np.ndarray  # (n, d) float32
    labels: np.ndarray  # (n,) uint32

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.uint32).ravel()
        if features.ndim != 2:
            raise DatasetError("features must be a 2-D (n, d) array")
        if features.shape[0] != labels.shape[0]:
            raise DatasetError("features and labels disagree on count")
        if not np.all(np.isfinite(features)):
            raise DatasetError("features must be finite")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class GzslDataset:
    catalog: ClassCatalog
    attributes: np.ndarray  # (attr_dim, |C|) float32, columns in catalog.all_ids order
    splits: dict[str, Split] = field(default_factory=dict)

    def __post_init__(self):
        attributes = np.ascontiguousarray(self.attributes, dtype=np.float32)
        if attributes.ndim != 2 or attributes.shape[1] != len(self.catalog):
            raise DatasetError("attributes must have one column per catalog class")
        object.__setattr__(self, "attributes", attributes)
        if set(self.splits) != set(SPLIT_NAMES):
            raise DatasetError(f"splits must be exactly {SPLIT_NAMES}")

        dims = {split.dim for split in self.splits.values()}
        if len(dims) != 1:
            raise DatasetError("splits disagree on feature dim")

        seen, unseen = set(self.catalog.seen_ids), set(self.catalog.unseen_ids)
        for name in SPLIT_NAMES:
            allowed = seen if name.endswith("_seen") else unseen
            present = set(np.unique(self.splits[name].labels).tolist())
            if not present <= allowed:
                raise SplitLabelError(
                    f"split {name} has labels {sorted(present - allowed)} "
                    "outside its side of the catalog")
        for name, ids in (("test_seen", seen), ("test_unseen", unseen)):
            missing = ids - set(self.splits[name].labels.tolist())
            if missing:
                raise DatasetError(f"{name} has no datapoints for classes {sorted(missing)}")

    @property
    def dim(self) -> int:
        return self.splits["train_seen"].dim

    @property
    def attr_dim(self) -> int:
        return self.attributes.shape[0]

    def __getitem__(self, name: str) -> Split:
        return self.splits[name]


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_standardizer(data) -> StandardizationStats:
    """Per-dimension mean and population std (divide by n), std floored at 1e-8."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise DatasetError("empty data")
    mean = data.mean(axis=0)
    # second pass removes the rounding residue; exact for constant columns
    mean += (data - mean).mean(axis=0)
    std = np.sqrt(((data - mean) ** 2).mean(axis=0))
    return StandardizationStats(mean=mean, std=np.maximum(std, STD_FLOOR))


def apply_standardizer(data, stats: StandardizationStats) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.shape[-1] != stats.dim:
        raise DatasetError(
            f"dimension mismatch: data has {data.shape[-1]}, stats have {stats.dim}")
    return (data - stats.mean) / stats.std


def generate_auxiliary(catalog: ClassCatalog, attributes, per_class: int,
                       noise_scale: float, seed: int, dim: int | None = None,
                       map_jitter: float = 0.1):
    """Stand-in feature generator for unseen classes.

    Each unseen class gets ``per_class`` points drawn around a prototype
    ``A @ a + b``, where ``a`` is the class attribute column and ``(A, b)`` is
    a fixed affine map seeded from ``seed``: the rectangular identity plus
    Gaussian jitter of scale ``map_jitter``. When attributes live in feature
    space (as in the synthetic benchmark) the prototypes sit near the true
    class centers and ``noise_scale`` controls generator fidelity.

    Returns ``(features, labels)`` with features of shape
    ``(per_class * n_unseen, dim)``, float32.
    """
    if per_class < 1:
        raise DatasetError("per_class must be >= 1")
    if noise_scale < 0:
        raise DatasetError("noise_scale must be >= 0")
    if catalog.n_unseen == 0:
        raise DatasetError("catalog has no unseen classes")
    attributes = np.asarray(attributes, dtype=np.float64)
    if attributes.ndim != 2 or attributes.shape[1] != len(catalog):
        raise DatasetError("attributes must have one column per catalog class")
    attr_dim = attributes.shape[0]
    dim = attr_dim if dim is None else int(dim)

    rng = np.random.default_rng(seed)
    jitter = rng.standard_normal((dim, attr_dim)) / np.sqrt(attr_dim)
    mapping = np.eye(dim, attr_dim) + map_jitter * jitter
    offset = map_jitter * rng.standard_normal(dim)
    prototypes = (mapping @ attributes[:, catalog.n_seen:]).T + offset  # (n_unseen, dim)

    noise = rng.standard_normal((catalog.n_unseen, per_class, dim))
    features = prototypes[:, None, :] + noise_scale * noise
    labels = np.repeat(np.asarray(catalog.unseen_ids, dtype=np.uint32), per_class)
    return features.reshape(-1, dim).astype(np.float32), labels


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs of the seeded Gaussian-cluster benchmark.

    The defaults are the standard benchmark used by the acceptance suite.
    ``center_scale`` is the std of the cluster centers, ``cluster_spread`` the
    std of real datapoints around them, ``noise_scale`` the std of generated
    auxiliary points around their prototypes.
    """

    n_seen_classes: int = 10
    n_unseen_classes: int = 5
    dim: int = 32
    train_per_class: int = 100
    test_per_class: int = 50
    aux_per_class: int = 100
    cluster_spread: float = 1.0
    noise_scale: float = 1.0
    center_scale: float = 1.0
    seed: int = 42

    def validate(self):
        counts = (self.n_seen_classes, self.n_unseen_classes, self.train_per_class,
                  self.test_per_class, self.aux_per_class)
        if min(counts) < 1:
            raise DatasetError("all class and per-class counts must be >= 1")
        if self.dim < 2:
            raise DatasetError("dim must be >= 2")
        if self.cluster_spread < 0 or self.noise_scale < 0 or self.center_scale <= 0:
            raise DatasetError("spreads must be >= 0 and center_scale > 0")


def make_synthetic_benchmark(spec: SyntheticSpec | None = None, **overrides) -> GzslDataset:
    if spec is None:
        spec = SyntheticSpec(**overrides)
    elif overrides:
        spec = SyntheticSpec(**{**spec.__dict__, **overrides})
    spec.validate()

    n_seen, n_unseen = spec.n_seen_classes, spec.n_unseen_classes
    catalog = ClassCatalog(tuple(range(n_seen)), tuple(range(n_seen, n_seen + n_unseen)))
    rng = np.random.default_rng(spec.seed)
    centers = spec.center_scale * rng.standard_normal((n_seen + n_unseen, spec.dim))

    def sample(class_positions, per_class):
        ids = np.asarray(catalog.all_ids, dtype=np.uint32)[class_positions]
        noise = rng.standard_normal((len(class_positions), per_class, spec.dim))
        points = centers[class_positions, None, :] + spec.cluster_spread * noise
        return Split(points.reshape(-1, spec.dim), np.repeat(ids, per_class))

    seen_pos = np.arange(n_seen)
    unseen_pos = np.arange(n_seen, n_seen + n_unseen)
    train_seen = sample(seen_pos, spec.train_per_class)
    test_seen = sample(seen_pos, spec.test_per_class)
    test_unseen = sample(unseen_pos, spec.test_per_class)

    # synthetic attributes are the true cluster centers
    attributes = centers.T.astype(np.float32)
    aux_seed = int(rng.integers(2**63))
    aux_x, aux_y = generate_auxiliary(catalog, attributes, spec.aux_per_class,
                                      spec.noise_scale, aux_seed, dim=spec.dim)
    return GzslDataset(
        catalog=catalog,
        attributes=attributes,
        splits={
            "train_seen": train_seen,
            "aux_unseen": Split(aux_x, aux_y),
            "test_seen": test_seen,
            "test_unseen": test_unseen,
        },
    )


# --- container IO -----------------------------------------------------------

def write_container(dataset: GzslDataset, path) -> None:
    cat = dataset.catalog
    parts = [
        CONTAINER_MAGIC,
        struct.pack("<5I", CONTAINER_VERSION, dataset.dim, dataset.attr_dim,
                    cat.n_seen, cat.n_unseen),
        np.asarray(cat.all_ids, dtype="<u4").tobytes(),
        # column-major attr_dim x |C| == one contiguous column per class
        np.ascontiguousarray(dataset.attributes.T, dtype="<f4").tobytes(),
    ]
    for name in SPLIT_NAMES:
        split = dataset.splits[name]
        parts.append(struct.pack("<Q", len(split)))
        parts.append(split.labels.astype("<u4").tobytes())
        parts.append(split.features.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise TruncatedError(
                f"truncated payload: need {n} bytes at offset {self.pos}, "
                f"have {len(self.buf) - self.pos}")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(size * count), dtype=dtype).copy()


def read_container(path) -> GzslDataset:
    reader = _Reader(Path(path).read_bytes())
    if reader.take(4) != CONTAINER_MAGIC:
        raise BadMagicError("bad magic: not a GZSL container")
    (version,) = struct.unpack("<I", reader.take(4))
    if version != CONTAINER_VERSION:
        raise VersionMismatchError(
            f"version mismatch: file has {version}, expected {CONTAINER_VERSION}")
    dim, attr_dim, n_seen, n_unseen = struct.unpack("<4I", reader.take(16))
    n_classes = n_seen + n_unseen
    ids = reader.array("<u4", n_classes).tolist()
    attributes = reader.array("<f4", attr_dim * n_classes).reshape(n_classes, attr_dim).T

    splits = {}
    for name in SPLIT_NAMES:
        (count,) = struct.unpack("<Q", reader.take(8))
        labels = reader.array("<u4", count)
        features = reader.array("<f4", count * dim).reshape(count, dim)
        splits[name] = Split(features, labels)
    if reader.pos != len(reader.buf):
        raise ContainerError(f"{len(reader.buf) - reader.pos} trailing bytes after payload")

    seen_ids, unseen_ids = ids[:n_seen], ids[n_seen:]
    if seen_ids != sorted(seen_ids) or unseen_ids != sorted(unseen_ids):
        raise ContainerError("class-id table is not in canonical order")
    try:
        catalog = ClassCatalog(tuple(seen_ids), tuple(unseen_ids))
        return GzslDataset(catalog=catalog, attributes=attributes, splits=splits)
    except ContainerError:
        raise
    except DatasetError as exc:
        raise ContainerError(f"invariant violation: {exc}") from None
