"""spikesev: spike-protein feature extraction and severity classification.

Pipeline stages: ingest (FASTA + metadata -> cohort), featurize (cohort ->
matrix + codebook), split, balance, train, evaluate / predict, plus a random
hyperparameter search and a finite-difference gradient check.
"""

__version__ = "0.1.0"
