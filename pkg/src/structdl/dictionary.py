"""Dictionary container: atoms plus the class group structure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .groups import GroupStructure


@dataclass
class Dictionary:
    """``M x K`` atom matrix whose columns are partitioned by ``gs``."""

    atoms: np.ndarray
    gs: GroupStructure

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim != 2:
            raise InvalidArgumentError(f"atoms must be 2-D, got shape {atoms.shape}")
        if atoms.shape[1] != self.gs.n_atoms:
            raise InvalidArgumentError(
                f"dictionary has {atoms.shape[1]} atoms but group structure has {self.gs.n_atoms}")
        if not np.all(np.isfinite(atoms)):
            raise InvalidArgumentError("dictionary contains non-finite values")
        self.atoms = atoms

    @property
    def n_features(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    def sub(self, c: int) -> np.ndarray:
        """Sub-dictionary ``D_c``."""
        return self.atoms[:, self.gs.slice(c)]

    def complement(self, c: int) -> np.ndarray:
        """Sub-dictionary ``D_{-c}`` (all other classes, order kept)."""
        return self.atoms[:, self.gs.complement_index(c)]

    def atom_norms(self) -> np.ndarray:
        return np.linalg.norm(self.atoms, axis=0)

    def copy(self) -> "Dictionary":
        return Dictionary(self.atoms.copy(), self.gs)


def normalize_columns(X):
    """Scale every nonzero column of ``X`` to unit l2 norm."""
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    return X / norms
