"""Synthetic class-structured data and the SDI comparison harness.

Each class owns a random Gaussian sub-dictionary with unit-norm atoms; every
sample is a Gaussian combination of ``s`` atoms from its own class, optionally
corrupted by white noise at a target SNR. The harness trains structured and
plain-l1 dictionaries on half the data and scores the codes of the other half.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import build_label_matrix, classify, fit, sdi
from .coding import (SolverConfig, dirty_encode_columns, hilasso_encode, lasso_encode,
                     training_penalty, training_solver_config)
from .dictionary import Dictionary, normalize_columns
from .errors import InvalidArgumentError
from .groups import GroupStructure, make_groups
from .learning import DlConfig, LabeledDataset, train, train_l1
from .theory import block_support

logger = logging.getLogger(__name__)

METHODS = ("hidl", "gddl", "lasso-separate", "lasso-all")
CSV_FIELDS = ("method", "snr_db", "sparsity", "trial", "sdi_train", "sdi_test",
              "block_rate", "accuracy", "seconds")


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters.

    ``snr_db=None`` (or ``inf``) means noiseless. ``subspace_dim`` restricts
    each class's atoms to a random subspace of that dimension; ``None`` draws
    unrestricted Gaussian atoms; with ``orthogonal_subspaces`` the class
    subspaces are mutually orthogonal (needs ``C * subspace_dim <= M``).
    ``nonnegative`` takes absolute values of
    the Gaussian coefficients; zero-mean codes have (nearly) zero class means,
    which no linear classifier on codes can separate.
    """

    n_classes: int = 4
    n_features: int = 20
    atoms_per_class: int = 10
    samples_per_class: int = 200
    sparsity: int = 3
    snr_db: float | None = None
    seed: int = 0
    subspace_dim: int | None = None
    nonnegative: bool = False
    orthogonal_subspaces: bool = False

    def __post_init__(self):
        for name in ("n_classes", "n_features", "atoms_per_class", "samples_per_class", "sparsity"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        if self.sparsity > self.atoms_per_class:
            raise InvalidArgumentError(
                f"sparsity {self.sparsity} exceeds atoms per class {self.atoms_per_class}")
        if self.subspace_dim is not None and not 1 <= self.subspace_dim <= self.n_features:
            raise InvalidArgumentError("subspace_dim must lie in 1..n_features")
        if self.orthogonal_subspaces and (
                self.subspace_dim is None or self.n_classes * self.subspace_dim > self.n_features):
            raise InvalidArgumentError(
                "orthogonal subspaces need subspace_dim with n_classes * subspace_dim <= n_features")

    @property
    def group_structure(self) -> GroupStructure:
        return make_groups([self.atoms_per_class] * self.n_classes)


@dataclass
class SynthTruth:
    dictionary: Dictionary
    codes: np.ndarray
    clean: np.ndarray
    noisy: np.ndarray
    labels: np.ndarray
    realized_snr_db: float
    bases: list | None = None

    @property
    def dataset(self) -> LabeledDataset:
        return LabeledDataset(self.noisy, self.labels)


def _noiseless(snr_db) -> bool:
    return snr_db is None or math.isinf(snr_db)


def snr_db(clean, noisy) -> float:
    """``10 log10(||X||_F^2 / ||noisy - X||_F^2)``; ``inf`` when equal."""
    err = float(np.sum((np.asarray(noisy) - clean) ** 2))
    if err == 0:
        return math.inf
    return 10.0 * math.log10(float(np.sum(np.asarray(clean) ** 2)) / err)


def add_noise(X, snr, seed=0):
    """Add white Gaussian noise whose expected energy gives the target SNR (dB)."""
    X = np.asarray(X, dtype=float)
    if _noiseless(snr):
        return X.copy()
    rng = np.random.default_rng(seed)
    power = float(np.sum(X * X)) / X.size
    sigma = math.sqrt(power / 10.0 ** (snr / 10.0))
    return X + sigma * rng.standard_normal(X.shape)


def generate(spec: SynthSpec) -> SynthTruth:
    """Draw a dictionary, block-sparse codes and (noisy) data; deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    M, C, Kc, Nc, s = (spec.n_features, spec.n_classes, spec.atoms_per_class,
                       spec.samples_per_class, spec.sparsity)
    blocks = []
    bases = [] if spec.subspace_dim else None
    if spec.orthogonal_subspaces:
        Q_all, _ = np.linalg.qr(rng.standard_normal((M, C * spec.subspace_dim)))
    for c in range(C):
        if spec.subspace_dim:
            if spec.orthogonal_subspaces:
                r = spec.subspace_dim
                Q = Q_all[:, c * r:(c + 1) * r]
            else:
                Q, _ = np.linalg.qr(rng.standard_normal((M, spec.subspace_dim)))
            bases.append(Q)
            blocks.append(Q @ rng.standard_normal((spec.subspace_dim, Kc)))
        else:
            blocks.append(rng.standard_normal((M, Kc)))
    gs = spec.group_structure
    D = Dictionary(normalize_columns(np.hstack(blocks)), gs)
    A = np.zeros((gs.n_atoms, C * Nc))
    labels = np.repeat(np.arange(1, C + 1), Nc)
    for i in range(C * Nc):
        c = labels[i]
        support = gs.offsets[c - 1] + rng.choice(Kc, size=s, replace=False)
        vals = rng.standard_normal(s)
        A[support, i] = np.abs(vals) if spec.nonnegative else vals
    clean = D.atoms @ A
    noisy = add_noise(clean, spec.snr_db, seed=int(rng.integers(2**32)))
    return SynthTruth(D, A, clean, noisy, labels, snr_db(clean, noisy), bases)


def split_indices(labels, fraction=0.5, seed=0):
    """Stratified random split of sample indices into (train, test)."""
    labels = np.asarray(labels).astype(int)
    if not 0 < fraction <= 1:
        raise InvalidArgumentError("fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        perm = rng.permutation(idx)
        n_train = int(round(fraction * idx.size))
        if n_train == 0 or n_train == idx.size:
            raise InvalidArgumentError(
                f"fraction {fraction} leaves class {c} with an empty train or test part")
        train_idx.append(np.sort(perm[:n_train]))
        test_idx.append(np.sort(perm[n_train:]))
    return np.concatenate(train_idx), np.concatenate(test_idx)


def split(truth, fraction=0.5, seed=0):
    """Stratified (train, test) :class:`LabeledDataset` pair from the noisy data."""
    data = truth.dataset if isinstance(truth, SynthTruth) else truth
    tr, te = split_indices(data.labels, fraction, seed)
    return data.subset(tr), data.subset(te)


# ---------------------------------------------------------------------------
# experiment harness

def sparsity_lambda(sparsity, sparsities) -> float:
    """Regularization weight by sparsity rank: 0.1, 0.05, 0.01 for low, mid, high."""
    levels = (0.1, 0.05, 0.01)
    rank = sorted(sparsities).index(sparsity)
    return levels[min(rank, len(levels) - 1)]


def label_atoms_by_usage(A, labels, gs: GroupStructure):
    """Assign unlabeled atoms to classes by coefficient mass.

    Classes pick, in class order, their ``K_c`` atoms with the largest total
    ``|a_ij|`` over their training samples among atoms not yet taken; ties go
    to the lower atom index. Returns the column permutation that makes the
    groups contiguous.
    """
    A = np.abs(np.asarray(A, dtype=float))
    labels = np.asarray(labels).astype(int)
    taken = np.zeros(A.shape[0], dtype=bool)
    order = []
    for c in range(1, gs.n_groups + 1):
        score = A[:, labels == c].sum(axis=1)
        score = np.where(taken, -np.inf, score)
        # stable sort on -score keeps lower atom index first on ties
        pick = np.argsort(-score, kind="stable")[: gs.size(c)]
        taken[pick] = True
        order.extend(pick.tolist())
    return np.asarray(order)


def _score(method, D, train_codes, test_codes, train, test, gs):
    L = build_label_matrix(train.labels, gs.n_groups)
    clf = fit(train_codes, L)
    pred = classify(test_codes, clf)
    passed, _ = block_support(test_codes, test.labels, gs, tol=1e-6)
    return {
        "sdi_train": sdi(train_codes, train.labels),
        "sdi_test": sdi(test_codes, test.labels),
        "block_rate": float(np.mean(passed)),
        "accuracy": float(np.mean(pred == test.labels)),
    }


def run_method(method, train_set, test_set, gs, lam, dl_config: DlConfig | None = None, seed=0):
    """Train one method and score its codes; returns a dict of metrics."""
    if method not in METHODS:
        raise InvalidArgumentError(f"unknown method {method!r}")
    base = dl_config or DlConfig()
    coder = replace(base.coder, lam1=lam, lam2=lam, lam3=lam, lam4=lam)
    if coder.fidelity == "penalized" and coder.mu0 == coder.mu_max:
        mu = training_penalty(lam)
        coder = replace(coder, mu0=mu, mu_max=mu)
    if method in ("hidl", "gddl"):
        cfg = replace(base, mode=method, coder=coder, seed=seed)
        D, codes, _ = train(train_set, gs, cfg)
        if method == "hidl":
            train_codes = codes.A
            test_codes = hilasso_encode(test_set.X, D, lam, lam, coder)
        else:
            train_codes = codes.A
            test_codes = dirty_encode_columns(test_set.X, D, coder).A
        return _score(method, D, train_codes, test_codes, train_set, test_set, gs)

    l1_cfg = SolverConfig(max_iters=3000, tol_primal=1e-8)
    rng = np.random.default_rng(seed)
    if method == "lasso-separate":
        blocks = []
        for c in range(1, gs.n_groups + 1):
            Xc = train_set.X[:, train_set.labels == c]
            init = normalize_columns(Xc[:, rng.choice(Xc.shape[1], gs.size(c), replace=False)])
            Dc, _, _ = train_l1(Xc, init, lam, base.max_outer_iters, base.obj_rel_tol, l1_cfg)
            blocks.append(Dc)
        D = Dictionary(np.hstack(blocks), gs)
    else:
        X = train_set.X
        init = normalize_columns(X[:, rng.choice(X.shape[1], gs.n_atoms, replace=False)])
        atoms, A_all, _ = train_l1(X, init, lam, base.max_outer_iters, base.obj_rel_tol, l1_cfg)
        order = label_atoms_by_usage(A_all, train_set.labels, gs)
        D = Dictionary(atoms[:, order], gs)
    train_codes = lasso_encode(train_set.X, D, lam, l1_cfg)
    test_codes = lasso_encode(test_set.X, D, lam, l1_cfg)
    return _score(method, D, train_codes, test_codes, train_set, test_set, gs)


def run_sdi_experiment(spec: SynthSpec, methods=METHODS, dl_config: DlConfig | None = None,
                       snrs=(10.0, 30.0, 50.0), sparsities=(2, 5, 8), trials=5,
                       lam_for=None, csv_path=None):
    """Sweep (method, SNR, sparsity, trial) cells and collect metrics.

    Every trial draws fresh data (seed derived from ``spec.seed``, the cell
    and the trial) and a fresh half/half split. ``lam_for(sparsity)`` picks the
    regularization weight; by default the 0.1/0.05/0.01 ladder over the
    sparsity grid. Returns a list of row dicts with :data:`CSV_FIELDS` keys and
    optionally writes them to ``csv_path``.
    """
    for m in methods:
        if m not in METHODS:
            raise InvalidArgumentError(f"unknown method {m!r}")
    if lam_for is None:
        def lam_for(s):
            return sparsity_lambda(s, sparsities)
    rows = []
    for si, s in enumerate(sparsities):
        for ni, snr in enumerate(snrs):
            for trial in range(trials):
                seed = spec.seed + 1000 * si + 100 * ni + trial
                truth = generate(replace(spec, sparsity=s, snr_db=snr, seed=seed))
                train_set, test_set = split(truth, 0.5, seed=seed)
                for method in methods:
                    t0 = time.perf_counter()
                    metrics = run_method(method, train_set, test_set, spec.group_structure,
                                         lam_for(s), dl_config, seed=seed)
                    row = {"method": method, "snr_db": snr, "sparsity": s, "trial": trial}
                    row.update(metrics)
                    row["seconds"] = time.perf_counter() - t0
                    logger.info("%s", row)
                    rows.append(row)
    if csv_path is not None:
        write_report(rows, csv_path)
    return rows


def write_report(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in CSV_FIELDS})


def summarize(rows):
    """Mean ``sdi_test`` per (method, snr_db, sparsity)."""
    out = {}
    for row in rows:
        key = (row["method"], row["snr_db"], row["sparsity"])
        out.setdefault(key, []).append(row["sdi_test"])
    return {k: float(np.mean(v)) for k, v in out.items()}
