"""Containers for discriminant scores and their CSV representation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InputError


def _as_scores(values) -> np.ndarray:
    arr = np.array(values, dtype=float).ravel()
    if arr.size == 0:
        raise InputError("score set is empty")
    if not np.all(np.isfinite(arr)):
        raise InputError("scores must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScoreSet:
    """Unlabeled discriminant scores (a test set)."""

    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scores", _as_scores(self.scores))

    @property
    def n_test(self) -> int:
        return int(self.scores.size)

    def __len__(self):
        return self.n_test

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.scores, dtype=dtype)


@dataclass(frozen=True)
class LabeledScores:
    """Training scores with labels in {+1, -1}; both classes must be present."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = _as_scores(self.scores)
        labels = np.array(self.labels).ravel()
        if labels.shape != scores.shape:
            raise InputError(f"{scores.size} scores but {labels.size} labels")
        labels = labels.astype(int)
        if not np.all((labels == 1) | (labels == -1)):
            raise InputError("labels must be +1 or -1")
        if not (np.any(labels == 1) and np.any(labels == -1)):
            raise InputError("both classes must be present in the training scores")
        labels.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @property
    def n_train(self) -> int:
        return int(self.scores.size)

    @property
    def positives(self) -> np.ndarray:
        return self.scores[self.labels == 1]

    @property
    def negatives(self) -> np.ndarray:
        return self.scores[self.labels == -1]

    @property
    def prevalence(self) -> float:
        return float(np.mean(self.labels == 1))


def _read_rows(path):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file, header row required") from None
        header = [h.strip().lower() for h in header]
        rows = [(i, row) for i, row in enumerate(reader, start=2) if any(c.strip() for c in row)]
    return path, header, rows


def _parse_float(path, line, text, column):
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"{path}:{line}: cannot parse {column} {text!r}") from None
    if not np.isfinite(value):
        raise InputError(f"{path}:{line}: non-finite {column}")
    return value


def read_train_csv(path) -> LabeledScores:
    """Read a training file with columns ``score`` and ``label`` (+1/-1)."""
    path, header, rows = _read_rows(path)
    for col in ("score", "label"):
        if col not in header:
            raise InputError(f"{path}:1: missing column {col!r}")
    i_s, i_l = header.index("score"), header.index("label")
    scores, labels = [], []
    for line, row in rows:
        if len(row) != len(header):
            raise InputError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        scores.append(_parse_float(path, line, row[i_s], "score"))
        label = _parse_float(path, line, row[i_l], "label")
        if label not in (1.0, -1.0):
            raise InputError(f"{path}:{line}: label must be +1 or -1, got {row[i_l]!r}")
        labels.append(int(label))
    if not scores:
        raise InputError(f"{path}: no data rows")
    try:
        return LabeledScores(scores, labels)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def read_test_csv(path) -> ScoreSet:
    """Read a test file with a single ``score`` column."""
    path, header, rows = _read_rows(path)
    if "score" not in header:
        raise InputError(f"{path}:1: missing column 'score'")
    i_s = header.index("score")
    scores = []
    for line, row in rows:
        if len(row) != len(header):
            raise InputError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        scores.append(_parse_float(path, line, row[i_s], "score"))
    if not scores:
        raise InputError(f"{path}: no data rows")
    return ScoreSet(scores)


def write_train_csv(path, train: LabeledScores):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["score", "label"])
        for s, y in zip(train.scores, train.labels):
            w.writerow([f"{s:.17g}", f"{y:+d}"])


def write_test_csv(path, test: ScoreSet):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["score"])
        for s in test.scores:
            w.writerow([f"{s:.17g}"])
