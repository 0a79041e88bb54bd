"""Closed-form proximal operators and their hierarchical compositions.

Every operator maps ``V`` to ``argmin_U 1/2 ||U - V||_F^2 + kappa * Omega(U)``
for its penalty ``Omega``. The composite operators apply the finer structure
first (rows or entries) and the class groups second; that order is exact
because each row/entry is nested inside exactly one group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .groups import GroupStructure


@dataclass(frozen=True)
class ProxThresholds:
    """Shrinkage thresholds for one ADMM step.

    ``group_a`` and ``row`` act on the shared part, ``group_b`` and ``elem``
    on the unique part.
    """

    group_a: float
    row: float
    group_b: float
    elem: float

    def __post_init__(self):
        for name in ("group_a", "row", "group_b", "elem"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise InvalidArgumentError(f"threshold {name}={val} must be finite and >= 0")

    @classmethod
    def from_weights(cls, lam_row, lam_elem, lam_group_a, lam_group_b, mu):
        """Divide the four regularization weights by the penalty ``mu``."""
        if not mu > 0:
            raise InvalidArgumentError(f"mu must be > 0, got {mu}")
        return cls(group_a=lam_group_a / mu, row=lam_row / mu,
                   group_b=lam_group_b / mu, elem=lam_elem / mu)


def _check_kappa(kappa):
    if not kappa >= 0:
        raise InvalidArgumentError(f"threshold must be >= 0, got {kappa}")


def _shrink_factor(norms, kappa):
    # zero norm -> factor 0, output stays exactly zero
    out = np.zeros_like(norms)
    nz = norms > 0
    out[nz] = np.maximum(1.0 - kappa / norms[nz], 0.0)
    return out


def prox_row_l2(V, kappa):
    """Row-wise group soft-thresholding (prox of the sum of row l2 norms)."""
    _check_kappa(kappa)
    V = np.asarray(V, dtype=float)
    if kappa == 0:
        return V.copy()
    if V.ndim == 1:
        V2 = V[:, None]
    else:
        V2 = V
    scale = _shrink_factor(np.linalg.norm(V2, axis=1), kappa)
    return (V2 * scale[:, None]).reshape(V.shape)


def prox_elementwise_l1(V, kappa):
    """Entry-wise soft-thresholding."""
    _check_kappa(kappa)
    V = np.asarray(V, dtype=float)
    return np.sign(V) * np.maximum(np.abs(V) - kappa, 0.0)


def prox_group_frobenius(V, gs: GroupStructure, kappa, per_column=False):
    """Keep or shrink each class block of rows together.

    With ``per_column=True`` every column is treated as its own task, so the
    block norm is the l2 norm of that column's group sub-vector.
    """
    _check_kappa(kappa)
    V = np.asarray(V, dtype=float)
    if V.ndim == 0 or V.shape[0] != gs.n_atoms:
        raise InvalidArgumentError(
            f"row count {V.shape[:1]} does not match K={gs.n_atoms}")
    if kappa == 0:
        return V.copy()
    squeeze = V.ndim == 1
    V2 = V[:, None] if squeeze else V
    # squared block norms per (group, column), summed over each group's rows
    sq = np.add.reduceat(V2 * V2, np.asarray(gs.offsets), axis=0)
    if not per_column:
        sq = sq.sum(axis=1, keepdims=True)
    scale = _shrink_factor(np.sqrt(sq), kappa)
    sizes = np.asarray(gs.group_sizes)
    out = V2 * np.repeat(scale, sizes, axis=0)
    return out[:, 0] if squeeze else out


def prox_composite_row(V, gs, kappa_group, kappa_row, per_column=False):
    """Prox of ``kappa_row * sum_j ||v_(j,:)||_2 + kappa_group * sum_g ||V_[g]||_F``.

    With ``per_column=True`` each column is a separate task; a row of a
    one-column task is a scalar, so the row step becomes soft-thresholding.
    """
    inner = prox_elementwise_l1(V, kappa_row) if per_column else prox_row_l2(V, kappa_row)
    return prox_group_frobenius(inner, gs, kappa_group, per_column)


def prox_composite_elem(V, gs, kappa_group, kappa_elem, per_column=False):
    """Prox of ``kappa_elem * ||V||_{1,1} + kappa_group * sum_g ||V_[g]||_F``."""
    return prox_group_frobenius(prox_elementwise_l1(V, kappa_elem), gs, kappa_group, per_column)
