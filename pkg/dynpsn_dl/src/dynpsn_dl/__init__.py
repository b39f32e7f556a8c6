"""Deep-learning baselines for dynamic protein structure network
classification, consuming the pipeline's interchange files (count matrices,
event streams, folds, labels) and emitting predictions in its format."""

__version__ = "0.1.0"


class InterchangeError(Exception):
    pass
