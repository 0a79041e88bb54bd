"""Class-blocked group structure over dictionary atoms.

Atoms are indexed from 0 (array positions); class labels run from 1 to C.
Group ``c`` is the contiguous range of atoms belonging to class ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class GroupStructure:
    """Partition of ``K`` atoms into ``C`` contiguous, non-overlapping groups.

    Parameters
    ----------
    group_sizes : tuple of int
        Number of atoms ``K_c`` in each class group, in class order.
    """

    group_sizes: tuple[int, ...]
    offsets: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.group_sizes)
        if len(sizes) == 0:
            raise InvalidArgumentError("group_sizes must be non-empty")
        if any(s < 1 for s in sizes):
            raise InvalidArgumentError(f"group sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "group_sizes", sizes)
        object.__setattr__(self, "offsets", tuple(int(o) for o in np.cumsum((0,) + sizes[:-1])))

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def n_atoms(self) -> int:
        return sum(self.group_sizes)

    def size(self, c: int) -> int:
        """``K_c`` for class ``c``."""
        return self.group_sizes[self._check_class(c) - 1]

    def complement_size(self, c: int) -> int:
        """``K_{-c} = K - K_c``."""
        return self.n_atoms - self.size(c)

    def slice(self, c: int) -> slice:
        """Row slice selecting group ``c``."""
        i = self._check_class(c) - 1
        start = self.offsets[i]
        return slice(start, start + self.group_sizes[i])

    def slices(self):
        """Iterate ``(c, slice)`` over all classes in order."""
        for c in range(1, self.n_groups + 1):
            yield c, self.slice(c)

    def complement_index(self, c: int) -> np.ndarray:
        """Atom indices outside group ``c``."""
        sl = self.slice(c)
        idx = np.arange(self.n_atoms)
        return np.concatenate([idx[: sl.start], idx[sl.stop:]])

    def atom_labels(self) -> np.ndarray:
        """Class label of every atom, shape ``(K,)``."""
        return np.repeat(np.arange(1, self.n_groups + 1), self.group_sizes)

    def without(self, c: int) -> "GroupStructure":
        """Structure of the complementary sub-dictionary ``D_{-c}``."""
        self._check_class(c)
        sizes = [s for i, s in enumerate(self.group_sizes, start=1) if i != c]
        if not sizes:
            raise InvalidArgumentError("cannot remove the only group")
        return GroupStructure(tuple(sizes))

    def _check_class(self, c) -> int:
        c = int(c)
        if not 1 <= c <= self.n_groups:
            raise InvalidArgumentError(f"class {c} outside 1..{self.n_groups}")
        return c

    def to_list(self) -> list[int]:
        return list(self.group_sizes)


def make_groups(group_sizes) -> GroupStructure:
    """Build a :class:`GroupStructure` with groups laid out in listed order."""
    return GroupStructure(tuple(group_sizes))


def group_of(gs: GroupStructure, atom_index: int) -> int:
    """Class label owning atom ``atom_index`` (0-based)."""
    j = int(atom_index)
    if not 0 <= j < gs.n_atoms:
        raise InvalidArgumentError(f"atom index {j} outside 0..{gs.n_atoms - 1}")
    return int(np.searchsorted(gs.offsets, j, side="right"))


def extract_group(v, gs: GroupStructure, c: int) -> np.ndarray:
    """Entries (vector) or rows (matrix) of ``v`` indexed by group ``c``.

    Returns a view into ``v``.
    """
    v = np.asarray(v)
    if v.ndim == 0 or v.shape[0] != gs.n_atoms:
        raise InvalidArgumentError(
            f"leading dimension {v.shape[:1]} does not match K={gs.n_atoms}")
    return v[gs.slice(c)]
