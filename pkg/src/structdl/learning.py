"""Structured dictionary learning: alternate structured coding and atom updates."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coding import (SolverConfig, gddl_encode, group_norm_sum, hilasso_encode,
                     shared_penalty, training_solver_config, unique_penalty)
from .dictionary import Dictionary, normalize_columns
from .errors import InvalidArgumentError
from .groups import GroupStructure

logger = logging.getLogger(__name__)

MODES = ("hidl", "gddl")

# Psi_jj at or below this marks an atom no sample selected
UNUSED_ATOM_EPS = 1e-10


@dataclass
class LabeledDataset:
    """Data matrix ``X`` (``M x N``, one sample per column) with labels in ``1..C``."""

    X: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.labels = np.asarray(self.labels).astype(int).ravel()
        if self.X.ndim != 2:
            raise InvalidArgumentError(f"X must be 2-D, got shape {self.X.shape}")
        if self.labels.shape[0] != self.X.shape[1]:
            raise InvalidArgumentError(
                f"{self.labels.shape[0]} labels for {self.X.shape[1]} samples")
        if self.labels.size and self.labels.min() < 1:
            raise InvalidArgumentError("labels must be >= 1")

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def class_index(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[:, idx], self.labels[idx])


@dataclass
class Codes:
    """Coefficients of a dataset; ``B`` is set only in GDDL mode."""

    A: np.ndarray
    B: np.ndarray | None = None

    @property
    def combined(self) -> np.ndarray:
        return self.A if self.B is None else self.A + self.B


@dataclass(frozen=True)
class DlConfig:
    """Outer-loop settings.

    In ``hidl`` mode the coder uses ``coder.lam1`` as the group weight and
    ``coder.lam2`` as the l1 weight; ``gddl`` mode uses all four weights.
    """

    mode: str = "hidl"
    coder: SolverConfig = field(default_factory=training_solver_config)
    max_outer_iters: int = 200
    obj_rel_tol: float = 1e-4
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.max_outer_iters) < 1:
            raise InvalidArgumentError("max_outer_iters must be >= 1")
        if not self.obj_rel_tol > 0:
            raise InvalidArgumentError("obj_rel_tol must be > 0")


@dataclass
class TrainStats:
    """Per-outer-iteration objective and its terms."""

    objective: list = field(default_factory=list)
    fidelity: list = field(default_factory=list)
    reg_a: list = field(default_factory=list)
    reg_b: list = field(default_factory=list)
    unused_atoms: list = field(default_factory=list)

    def __len__(self):
        return len(self.objective)

    def append(self, terms, unused):
        self.objective.append(terms["objective"])
        self.fidelity.append(terms["fidelity"])
        self.reg_a.append(terms["reg_a"])
        self.reg_b.append(terms["reg_b"])
        self.unused_atoms.append(list(unused))

    def rows(self):
        for t in range(len(self)):
            yield {"iteration": t + 1, "objective": self.objective[t],
                   "fidelity": self.fidelity[t], "reg_a": self.reg_a[t],
                   "reg_b": self.reg_b[t], "unused_atoms": len(self.unused_atoms[t])}


def init_dictionary(data: LabeledDataset, gs: GroupStructure, seed=0) -> Dictionary:
    """Sample ``K_c`` distinct class-``c`` columns per group and normalize them."""
    rng = np.random.default_rng(seed)
    cols = []
    for c, sl in gs.slices():
        idx = data.class_index(c)
        k = gs.size(c)
        if idx.size < k:
            raise InvalidArgumentError(
                f"class {c} has {idx.size} samples, needs at least {k} to seed its atoms")
        cols.append(data.X[:, rng.choice(idx, size=k, replace=False)])
    return Dictionary(normalize_columns(np.hstack(cols)), gs)


def accumulate_stats(A, X):
    """Return ``Psi = A A^T`` and ``Phi = X A^T``."""
    A = np.asarray(A, dtype=float)
    X = np.asarray(X, dtype=float)
    if A.ndim != 2 or X.ndim != 2 or A.shape[1] != X.shape[1]:
        raise InvalidArgumentError(f"sample counts differ: A {A.shape}, X {X.shape}")
    return A @ A.T, X @ A.T


def update_atom(D: Dictionary, Psi, Phi, j: int, eps=UNUSED_ATOM_EPS) -> bool:
    """Block-coordinate update of atom ``j`` in place.

    Returns False (atom untouched) when ``Psi[j, j] <= eps``.
    """
    if not 0 <= j < D.n_atoms:
        raise InvalidArgumentError(f"atom index {j} outside 0..{D.n_atoms - 1}")
    pjj = Psi[j, j]
    if pjj <= eps:
        return False
    d_hat = (Phi[:, j] - D.atoms @ Psi[:, j]) / pjj + D.atoms[:, j]
    norm = np.linalg.norm(d_hat)
    if norm == 0 or not np.isfinite(norm):
        return False
    D.atoms[:, j] = d_hat / norm
    return True


def encode(data_X, D: Dictionary, cfg: DlConfig, labels=None) -> Codes:
    """Code ``data_X`` in the configured mode.

    GDDL needs ``labels`` to form class blocks.
    """
    coder = cfg.coder
    if cfg.mode == "hidl":
        return Codes(hilasso_encode(data_X, D, coder.lam1, coder.lam2, coder))
    if labels is None:
        raise InvalidArgumentError("GDDL coding of class blocks requires labels")
    labels = np.asarray(labels)
    K, N = D.n_atoms, data_X.shape[1]
    A = np.zeros((K, N))
    B = np.zeros((K, N))
    classes = [c for c in np.unique(labels)]

    def one(c):
        idx = np.flatnonzero(labels == c)
        return idx, gddl_encode(data_X[:, idx], D, coder)

    if cfg.threads and cfg.threads > 1 and len(classes) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(one, classes))
    else:
        results = [one(c) for c in classes]
    for idx, code in results:
        A[:, idx] = code.A
        B[:, idx] = code.B
    return Codes(A, B)


def objective_value(data: LabeledDataset, D: Dictionary, codes: Codes, cfg: DlConfig):
    """Objective of the configured mode, with its term breakdown.

    Returns ``(total, terms)`` where ``terms`` has keys ``objective``,
    ``fidelity`` (half squared residual), ``reg_a`` and ``reg_b``.
    """
    X = data.X
    if codes.A.shape != (D.n_atoms, X.shape[1]):
        raise InvalidArgumentError("code shape does not match dictionary and data")
    lam1, lam2, lam3, lam4 = cfg.coder.weights
    R = X - D.atoms @ codes.combined
    fid = 0.5 * float(np.sum(R * R))
    if cfg.mode == "hidl":
        reg_a = (lam1 * group_norm_sum(codes.A, D.gs, per_column=True)
                 + lam2 * float(np.abs(codes.A).sum()))
        reg_b = 0.0
    else:
        reg_a = reg_b = 0.0
        B = codes.B if codes.B is not None else np.zeros_like(codes.A)
        for c in np.unique(data.labels):
            idx = data.class_index(c)
            reg_a += shared_penalty(codes.A[:, idx], D.gs, lam1, lam3)
            reg_b += unique_penalty(B[:, idx], D.gs, lam2, lam4)
    total = fid + reg_a + reg_b
    return total, {"objective": total, "fidelity": fid, "reg_a": reg_a, "reg_b": reg_b}


def train(data: LabeledDataset, gs: GroupStructure, cfg: DlConfig | None = None,
          callback=None, init=None):
    """Learn a class-structured dictionary.

    Parameters
    ----------
    data : LabeledDataset
    gs : GroupStructure
        Group ``c`` holds the atoms of class ``c``.
    cfg : DlConfig
    callback : callable, optional
        Called as ``callback(t, D_before, D_after, codes)`` after every outer
        iteration; ``D_before`` is a snapshot taken before the atom sweep.
    init : Dictionary, optional
        Starting dictionary; sampled from the data when omitted.

    Returns
    -------
    D : Dictionary
    codes : Codes
        Codes from the last coding stage.
    stats : TrainStats
    """
    cfg = cfg or DlConfig()
    if data.n_classes > gs.n_groups:
        raise InvalidArgumentError(
            f"labels reach class {data.n_classes} but only {gs.n_groups} groups exist")
    D = init.copy() if init is not None else init_dictionary(data, gs, cfg.seed)
    stats = TrainStats()
    prev = None
    codes = None
    for t in range(1, int(cfg.max_outer_iters) + 1):
        codes = encode(data.X, D, cfg, data.labels)
        Psi, Phi = accumulate_stats(codes.combined, data.X)
        D_before = D.copy()
        unused = [j for j in range(D.n_atoms) if not update_atom(D, Psi, Phi, j)]
        if unused:
            logger.debug("iteration %d: %d unused atoms left unchanged", t, len(unused))
        obj, terms = objective_value(data, D, codes, cfg)
        stats.append(terms, unused)
        if callback is not None:
            callback(t, D_before, D, codes)
        if prev is not None and abs(prev - obj) <= cfg.obj_rel_tol * max(abs(prev), 1e-300):
            break
        prev = obj
    return D, codes, stats


def train_l1(X, init_atoms, lam, max_outer_iters=200, obj_rel_tol=1e-4, coder=None):
    """Unstructured baseline: l1 coding with the same atom-update sweep.

    Returns ``(atoms, A, objectives)``.
    """
    from .coding import lasso_encode, lasso_objective

    X = np.asarray(X, dtype=float)
    D = Dictionary(np.array(init_atoms, dtype=float),
                   GroupStructure((np.asarray(init_atoms).shape[1],)))
    objectives = []
    prev = None
    A = None
    for _ in range(int(max_outer_iters)):
        A = lasso_encode(X, D, lam, coder)
        Psi, Phi = accumulate_stats(A, X)
        for j in range(D.n_atoms):
            update_atom(D, Psi, Phi, j)
        obj = lasso_objective(X, D, A, lam)
        objectives.append(obj)
        if prev is not None and abs(prev - obj) <= obj_rel_tol * max(abs(prev), 1e-300):
            break
        prev = obj
    return D.atoms, A, objectives
