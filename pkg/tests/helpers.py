"""Shared fixture builders: synthetic cohorts, separable blob datasets and
the stored score/label fixture that reproduces the reference confusion
matrix."""

from __future__ import annotations

import numpy as np

from spikesev.layers import Conv1DSpec, DenseSpec, DropoutSpec, LSTMSpec, MaxPool1DSpec
from spikesev.scales import AMINO_ACIDS

MILD_EXAMPLES = ("Mild", "Asymptomatic", "Home", "not hospitalized")
SEVERE_EXAMPLES = ("DEAD", "Deceased", "Intensive Care", "IC")


def random_sequence(rng: np.random.Generator, length: int) -> str:
    return "".join(AMINO_ACIDS[i] for i in rng.integers(0, 20, length))


def cohort_fixture_texts(
    n_mild: int = 12,
    n_severe: int = 28,
    n_noise: int = 6,
    seq_len: int = 50,
    seed: int = 11,
) -> tuple[str, str]:
    """Deterministic FASTA + TSV metadata texts. The noise rows exercise the
    exclusion paths (inconclusive/unknown status, missing fields, bad dates,
    odd genders)."""
    rng = np.random.default_rng(seed)
    fasta_lines: list[str] = []
    meta_lines = ["accession\tstatus\tage\tgender\tclade\tlineage\tdate"]
    clades = ["GR", "GK", "GH"]
    lineages = ["P.1", "AY.99.2", "B.1.1.33"]

    def add(acc, status, age, gender, clade, lineage, date, with_seq=True):
        if with_seq:
            fasta_lines.append(f">{acc}")
            fasta_lines.append(random_sequence(rng, seq_len))
        meta_lines.append(f"{acc}\t{status}\t{age}\t{gender}\t{clade}\t{lineage}\t{date}")

    i = 0
    for _ in range(n_mild):
        add(f"EPI{i:04d}", MILD_EXAMPLES[i % len(MILD_EXAMPLES)], 30 + i % 40,
            "male" if i % 2 else "female", clades[i % 3], lineages[i % 3], "2021-03-05")
        i += 1
    for _ in range(n_severe):
        add(f"EPI{i:04d}", SEVERE_EXAMPLES[i % len(SEVERE_EXAMPLES)], 40 + i % 35,
            "Female" if i % 2 else "Male", clades[i % 3], lineages[(i + 1) % 3], "2021-04-11")
        i += 1
    noise = [
        ("Hospitalized", 50, "male", "GR", "P.1", "2021-05-01"),      # inconclusive
        ("recovering at home", 41, "female", "GK", "P.1", "2021-05-02"),  # unmapped
        ("Mild", "", "male", "GR", "P.1", "2021-05-03"),              # missing age
        ("DEAD", 66, "unknown", "GR", "P.1", "2021-05-04"),           # odd gender
        ("Mild", 29, "female", "GR", "P.1", "2021-05"),               # partial date
        ("Deceased", 71, "male", "", "P.1", "2021-05-06"),            # missing clade
    ]
    for status, age, gender, clade, lineage, date in noise[:n_noise]:
        add(f"EPI{i:04d}", status, age, gender, clade, lineage, date)
        i += 1
    return "\n".join(fasta_lines) + "\n", "\n".join(meta_lines) + "\n"


def separable_blobs(
    n: int = 1000,
    length: int = 512,
    seed: int = 7,
    noise: float = 0.3,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-class Gaussian blobs laid out like assembled feature vectors:
    a 29-slot leading block, a sparse mid block and a dense trailing block
    all carry class-dependent means."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n).astype(np.uint8)
    x = rng.normal(0.0, noise, (n, length))
    sign = np.where(y == 1, 1.0, -1.0)
    x[:, :29] += sign[:, None] * 1.0
    x[:, np.arange(29, length - 33, 3)] += sign[:, None] * 0.5
    x[:, length - 33 :] += sign[:, None] * 0.8
    return x.astype(np.float32), y


def best_threshold_accuracy(x_col: np.ndarray, y: np.ndarray) -> float:
    """Accuracy of the best single-coordinate threshold classifier."""
    best = 0.0
    for t in np.linspace(x_col.min(), x_col.max(), 101):
        for pred in ((x_col >= t), (x_col < t)):
            best = max(best, float((pred.astype(np.uint8) == y).mean()))
    return best


def scaled_stack(
    n_stages: int = 3,
    filters: int = 8,
    lstm_units: int = 16,
    dense_units: int = 16,
):
    specs = []
    for _ in range(n_stages):
        specs += [Conv1DSpec(filters, 4), MaxPool1DSpec(2), DropoutSpec(0.166)]
    specs += [
        LSTMSpec(lstm_units),
        DenseSpec(dense_units, "relu"),
        DropoutSpec(0.166),
        DenseSpec(1, "sigmoid"),
    ]
    return specs


def reference_confusion_fixture() -> tuple[np.ndarray, np.ndarray]:
    """Scores/labels built to yield tn=383, fp=84, fn=37, tp=190 at 0.5."""
    y = np.concatenate([np.zeros(467, dtype=np.uint8), np.ones(227, dtype=np.uint8)])
    scores = np.concatenate(
        [
            np.full(383, 0.2),
            np.full(84, 0.8),
            np.full(37, 0.3),
            np.full(190, 0.7),
        ]
    )
    return y, scores


def brute_force_auc(y: np.ndarray, scores: np.ndarray) -> float:
    """Pair-enumeration oracle: wins + half-ties over all pos/neg pairs."""
    pos = scores[y == 1]
    neg = scores[y == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))
