"""Ridge classifier on sparse codes and the sparse-code discrimination index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InvalidArgumentError

# ridge parameter relative to tr(A A^T) / K when none is given
DEFAULT_ETA_SCALE = 1e-2


@dataclass
class LinearClassifier:
    """Scores ``W a`` for a code ``a``; ``W`` has one row per class."""

    W: np.ndarray
    eta: float

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]


def build_label_matrix(labels, n_classes: int) -> np.ndarray:
    """One-hot ``C x N`` matrix: column ``i`` has its 1 in row ``labels[i] - 1``."""
    labels = np.asarray(labels).astype(int).ravel()
    if labels.size and (labels.min() < 1 or labels.max() > n_classes):
        raise InvalidArgumentError(f"labels must lie in 1..{n_classes}")
    L = np.zeros((n_classes, labels.size))
    L[labels - 1, np.arange(labels.size)] = 1.0
    return L


def default_eta(A) -> float:
    A = np.asarray(A, dtype=float)
    scale = float(np.sum(A * A)) / max(A.shape[0], 1)
    return DEFAULT_ETA_SCALE * scale if scale > 0 else DEFAULT_ETA_SCALE


def fit(A, L, eta=None) -> LinearClassifier:
    """Solve ``(A A^T + eta I) W^T = A L^T``.

    For GDDL pass only the shared part of the codes.
    """
    A = np.asarray(A, dtype=float)
    L = np.asarray(L, dtype=float)
    if A.ndim != 2 or L.ndim != 2 or A.shape[1] != L.shape[1]:
        raise InvalidArgumentError(f"shape mismatch: A {A.shape}, L {L.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(L))):
        raise InvalidArgumentError("non-finite input to classifier fit")
    if eta is None:
        eta = default_eta(A)
    if not eta > 0:
        raise InvalidArgumentError(f"eta must be > 0, got {eta}")
    lhs = A @ A.T + eta * np.eye(A.shape[0])
    Wt = linalg.solve(lhs, A @ L.T, assume_a="pos")
    return LinearClassifier(np.ascontiguousarray(Wt.T), float(eta))


def classify(a, clf: LinearClassifier):
    """Class label (1-based) of a code vector, or an array of labels for a ``K x N`` matrix.

    Ties go to the lowest class index.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[0] != clf.W.shape[1]:
        raise InvalidArgumentError(
            f"code length {a.shape[0]} does not match classifier width {clf.W.shape[1]}")
    scores = clf.W @ a
    labels = np.argmax(scores, axis=0) + 1
    return int(labels) if a.ndim == 1 else labels


def sdi(A, labels) -> float:
    """Sparse-code discrimination index ``(tr S_within - tr S_between) / N``.

    Traces are sums of squared deviations; no scatter matrix is formed.
    Smaller is more discriminative.
    """
    A = np.asarray(A, dtype=float)
    labels = np.asarray(labels).astype(int).ravel()
    if A.ndim != 2 or A.shape[1] != labels.size:
        raise InvalidArgumentError("codes and labels disagree on sample count")
    if labels.size == 0:
        raise InvalidArgumentError("no samples")
    C = int(labels.max())
    m = A.mean(axis=1)
    within = 0.0
    between = 0.0
    for c in range(1, C + 1):
        Ac = A[:, labels == c]
        if Ac.shape[1] == 0:
            raise InvalidArgumentError(f"class {c} has no samples")
        mc = Ac.mean(axis=1)
        within += float(np.sum((Ac - mc[:, None]) ** 2))
        between += Ac.shape[1] * float(np.sum((mc - m) ** 2))
    return (within - between) / labels.size
