"""Model-ready dataset assembly: covariate encoding, feature concatenation
with zero padding, stratified splitting, SMOTE balancing and the on-disk
matrix format.

Labels are binary: mild = 1 (the positive class), severe = 0.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import Severity, SpikeRecord
from .scales import ScalesRegistry
from .seqfeatures import GLOBAL_DESCRIPTOR_LENGTH, global_descriptors, residue_encoding

LABEL_OF = {Severity.MILD: 1, Severity.SEVERE: 0}

DEFAULT_N_MODEL = 16730

# Fixed field order of the one-hot covariate blocks.
COVARIATE_FIELDS = ("gender", "age", "clade", "lineage")

MATRIX_MAGIC = b"SSEVMAT1"


class MatrixFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CovariateCodebook:
    """Per-field category vocabularies, fixed after fitting.

    Categories are stored as strings in lexicographic order; ages are their
    decimal representations (or decade bins like "50s" in decade mode).
    Values unseen at fit time encode to an all-zero block.
    """

    categories: dict[str, tuple[str, ...]]
    age_binning: str = "exact"  # "exact" or "decade"

    @property
    def width(self) -> int:
        return sum(len(v) for v in self.categories.values())

    def to_text(self, registry_hash: str | None = None) -> str:
        lines = ["# covariate codebook v1"]
        if registry_hash:
            lines.append(f"# registry_hash {registry_hash}")
        lines.append(f"# age_binning {self.age_binning}")
        for fieldname in COVARIATE_FIELDS:
            lines.extend(f"{fieldname}\t{value}" for value in self.categories[fieldname])
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CovariateCodebook":
        age_binning = "exact"
        cats: dict[str, list[str]] = {f: [] for f in COVARIATE_FIELDS}
        for line in text.splitlines():
            if line.startswith("# age_binning"):
                age_binning = line.split()[-1]
                continue
            if not line.strip() or line.startswith("#"):
                continue
            fieldname, value = line.split("\t", 1)
            cats[fieldname].append(value)
        return cls(categories={f: tuple(v) for f, v in cats.items()}, age_binning=age_binning)


def _age_category(age: int, binning: str) -> str:
    if binning == "decade":
        return f"{(age // 10) * 10}s"
    return str(age)


def fit_codebook(records: list[SpikeRecord], age_binning: str = "exact") -> CovariateCodebook:
    if not records:
        raise ValueError("cannot fit a codebook on an empty record list")
    if age_binning not in ("exact", "decade"):
        raise ValueError(f"unknown age binning mode: {age_binning}")
    values: dict[str, set[str]] = {f: set() for f in COVARIATE_FIELDS}
    for rec in records:
        values["gender"].add(rec.gender)
        values["age"].add(_age_category(rec.age, age_binning))
        values["clade"].add(rec.clade)
        values["lineage"].add(rec.lineage)
    return CovariateCodebook(
        categories={f: tuple(sorted(v)) for f, v in values.items()},
        age_binning=age_binning,
    )


def encode_covariates(record: SpikeRecord, codebook: CovariateCodebook) -> np.ndarray:
    """Concatenated one-hot blocks in fixed field order; unseen values -> zeros."""
    out = np.zeros(codebook.width, dtype=np.float64)
    offset = 0
    for fieldname in COVARIATE_FIELDS:
        cats = codebook.categories[fieldname]
        if fieldname == "age":
            value = _age_category(record.age, codebook.age_binning)
        else:
            value = getattr(record, "gender" if fieldname == "gender" else fieldname)
        try:
            out[offset + cats.index(value)] = 1.0
        except ValueError:
            pass
        offset += len(cats)
    return out


@dataclass(frozen=True)
class BlockWeights:
    sequence: float = 1.0
    covariates: float = 1.0


@dataclass(frozen=True)
class BlockLayout:
    """Half-open slot ranges of the four blocks inside a feature vector."""

    global_block: tuple[int, int]
    residue_block: tuple[int, int]
    covariate_block: tuple[int, int]
    padding_block: tuple[int, int]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray  # float32, length n_model
    label: int  # 1 = mild, 0 = severe
    accession: str | None = None
    layout: BlockLayout | None = None
    truncated: bool = False


def assemble(
    record: SpikeRecord,
    registry: ScalesRegistry,
    codebook: CovariateCodebook,
    n_model: int = DEFAULT_N_MODEL,
    block_weights: BlockWeights = BlockWeights(),
) -> FeatureVector:
    """Build [global | residue rows (row-major) | covariates | zero padding].

    Sequence-derived blocks are scaled by block_weights.sequence and the
    covariate block by block_weights.covariates. If the residue block does
    not fit it is truncated at the tail and the vector is flagged.
    """
    width = codebook.width
    if n_model < GLOBAL_DESCRIPTOR_LENGTH + width:
        raise ValueError(
            f"model length too small: need at least {GLOBAL_DESCRIPTOR_LENGTH + width}, got {n_model}"
        )
    g = global_descriptors(record.sequence, registry).to_vector()
    residue = residue_encoding(record.sequence, registry).matrix.reshape(-1)
    cov = encode_covariates(record, codebook)

    avail = n_model - GLOBAL_DESCRIPTOR_LENGTH - width
    truncated = residue.size > avail
    if truncated:
        residue = residue[:avail]

    values = np.zeros(n_model, dtype=np.float64)
    values[:GLOBAL_DESCRIPTOR_LENGTH] = g * block_weights.sequence
    r_end = GLOBAL_DESCRIPTOR_LENGTH + residue.size
    values[GLOBAL_DESCRIPTOR_LENGTH:r_end] = residue * block_weights.sequence
    values[r_end : r_end + width] = cov * block_weights.covariates

    layout = BlockLayout(
        global_block=(0, GLOBAL_DESCRIPTOR_LENGTH),
        residue_block=(GLOBAL_DESCRIPTOR_LENGTH, r_end),
        covariate_block=(r_end, r_end + width),
        padding_block=(r_end + width, n_model),
    )
    return FeatureVector(
        values=values.astype(np.float32),
        label=LABEL_OF[record.label],
        accession=record.accession_id,
        layout=layout,
        truncated=truncated,
    )


@dataclass(frozen=True)
class DatasetSplit:
    train: list[FeatureVector]
    test: list[FeatureVector]
    seed: int


def stratified_split(vectors: list[FeatureVector], ratio: float, seed: int) -> DatasetSplit:
    """Per-class seeded shuffle; floor(ratio * n_class) to train, rest to test.

    Deterministic given the seed; both parts keep the input order of their
    members.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    by_class: dict[int, list[int]] = {0: [], 1: []}
    for i, v in enumerate(vectors):
        by_class[v.label].append(i)
    for label, idxs in by_class.items():
        if not idxs:
            raise ValueError(f"class {label} has no records")
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for label in (0, 1):
        idxs = np.array(by_class[label])
        rng.shuffle(idxs)
        n_train = int(np.floor(ratio * len(idxs)))
        train_idx.extend(idxs[:n_train].tolist())
        test_idx.extend(idxs[n_train:].tolist())
    return DatasetSplit(
        train=[vectors[i] for i in sorted(train_idx)],
        test=[vectors[i] for i in sorted(test_idx)],
        seed=seed,
    )


def smote(train_vectors: list[FeatureVector], k: int = 5, seed: int = 0) -> list[FeatureVector]:
    """Balance classes by interpolating synthetic minority samples.

    Each synthetic sample is x + lam * (z - x) for a random minority sample x,
    one of its k nearest minority neighbours z (Euclidean) and lam ~ U[0, 1].
    Originals are returned unchanged, synthetics appended.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = {0: 0, 1: 0}
    for v in train_vectors:
        counts[v.label] += 1
    if counts[0] == counts[1]:
        return list(train_vectors)
    minority = 0 if counts[0] < counts[1] else 1
    n_min, n_maj = counts[minority], counts[1 - minority]
    if n_min < 2:
        raise ValueError("SMOTE requires >=2 minority samples")
    k = min(k, n_min - 1)

    minority_rows = np.stack(
        [v.values.astype(np.float64) for v in train_vectors if v.label == minority]
    )
    # Pairwise distances; self excluded, ties broken by index for determinism.
    deltas = minority_rows[:, None, :] - minority_rows[None, :, :]
    dists = np.sqrt((deltas**2).sum(axis=2))
    np.fill_diagonal(dists, np.inf)
    neighbor_idx = np.argsort(dists, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(seed)
    synthetics: list[FeatureVector] = []
    for i in range(n_maj - n_min):
        x_i = int(rng.integers(0, n_min))
        z_i = int(neighbor_idx[x_i, int(rng.integers(0, k))])
        lam = float(rng.random())
        values = minority_rows[x_i] + lam * (minority_rows[z_i] - minority_rows[x_i])
        synthetics.append(
            FeatureVector(
                values=values.astype(np.float32),
                label=minority,
                accession=f"synthetic-{i}",
            )
        )
    return list(train_vectors) + synthetics


def to_arrays(vectors: list[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    """Stack vectors into (X float32 [n, d], y uint8 [n])."""
    x = np.stack([v.values for v in vectors]).astype(np.float32)
    y = np.array([v.label for v in vectors], dtype=np.uint8)
    return x, y


def write_matrix(vectors: list[FeatureVector], path: str | Path) -> None:
    """Binary matrix: magic, u32 rows, u32 cols, f32 LE payload, u8 labels."""
    if not vectors:
        raise ValueError("refusing to write an empty matrix")
    x, y = to_arrays(vectors)
    rows, cols = x.shape
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(x.astype("<f4").tobytes())
        fh.write(y.tobytes())


def read_matrix(path: str | Path) -> list[FeatureVector]:
    blob = Path(path).read_bytes()
    if len(blob) < len(MATRIX_MAGIC) + 8:
        raise MatrixFormatError(f"{path}: truncated header")
    if blob[: len(MATRIX_MAGIC)] != MATRIX_MAGIC:
        raise MatrixFormatError(f"{path}: bad magic, not a feature matrix file")
    rows, cols = struct.unpack_from("<II", blob, len(MATRIX_MAGIC))
    offset = len(MATRIX_MAGIC) + 8
    expected = offset + rows * cols * 4 + rows
    if len(blob) < expected:
        raise MatrixFormatError(f"{path}: truncated payload (expected {expected} bytes, got {len(blob)})")
    if len(blob) > expected:
        raise MatrixFormatError(f"{path}: payload size inconsistent with header dimensions")
    x = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=offset).reshape(rows, cols)
    labels = np.frombuffer(blob, dtype=np.uint8, count=rows, offset=offset + rows * cols * 4)
    return [
        FeatureVector(values=x[i].copy(), label=int(labels[i]))
        for i in range(rows)
    ]


def write_accessions(vectors: list[FeatureVector], path: str | Path) -> None:
    """Row-aligned accession sidecar for a matrix file."""
    lines = [v.accession if v.accession is not None else "-" for v in vectors]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_accessions(path: str | Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()
