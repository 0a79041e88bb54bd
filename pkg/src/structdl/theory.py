"""Numerical checks of the subspace-recovery theory for HiLasso coding.

Covers independence/disjointness of subspace families, smallest principal
angles, the sufficient condition relating sub-dictionary conditioning to
inter-subspace coherence, the exact two-sided comparison behind it, block
support of codes, and whether atom updates stay inside their class subspace.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .coding import SolverConfig, hilasso_encode, group_norm_sum
from .dictionary import Dictionary
from .errors import InfeasibleError, InvalidArgumentError
from .groups import GroupStructure, make_groups

# singular values below RANK_TOL * sigma_max count as zero
RANK_TOL = 1e-8
ORTHO_TOL = 1e-10


@dataclass
class SubspaceFamily:
    """One orthonormal basis (``M x r_c``) per class."""

    bases: list

    def __post_init__(self):
        bases = [np.asarray(b, dtype=float) for b in self.bases]
        if not bases:
            raise InvalidArgumentError("empty subspace family")
        M = bases[0].shape[0]
        for b in bases:
            _check_orthonormal(b)
            if b.shape[0] != M:
                raise InvalidArgumentError("bases live in different ambient dimensions")
        self.bases = bases

    @property
    def dims(self):
        return [b.shape[1] for b in self.bases]

    @classmethod
    def from_dictionary(cls, D: Dictionary) -> "SubspaceFamily":
        return cls([orthonormal_basis(D.sub(c)) for c in range(1, D.gs.n_groups + 1)])


def _check_orthonormal(B):
    if B.ndim != 2 or B.shape[1] < 1:
        raise InvalidArgumentError(f"basis must be 2-D with >= 1 column, got {B.shape}")
    if not np.allclose(B.T @ B, np.eye(B.shape[1]), atol=ORTHO_TOL, rtol=0):
        raise InvalidArgumentError("basis columns are not orthonormal")


def _rank(M_, tol=RANK_TOL):
    s = np.linalg.svd(M_, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def orthonormal_basis(D_c):
    """Orthonormal basis of the column span of ``D_c`` (thin SVD, rank-revealing)."""
    U, s, _ = np.linalg.svd(np.asarray(D_c, dtype=float), full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise InvalidArgumentError("sub-dictionary has zero span")
    r = int(np.sum(s > RANK_TOL * s[0]))
    return U[:, :r]


def principal_angle_cos(B1, B2) -> float:
    """Cosine of the smallest principal angle between two subspaces."""
    B1 = np.asarray(B1, dtype=float)
    B2 = np.asarray(B2, dtype=float)
    _check_orthonormal(B1)
    _check_orthonormal(B2)
    if B1.shape[0] != B2.shape[0]:
        raise InvalidArgumentError("bases live in different ambient dimensions")
    s = np.linalg.svd(B1.T @ B2, compute_uv=False)
    return float(min(max(s[0], 0.0), 1.0))


def check_independent(fam: SubspaceFamily) -> bool:
    """Dimension of the sum equals the sum of dimensions."""
    return _rank(np.hstack(fam.bases)) == sum(fam.dims)


def check_disjoint(fam: SubspaceFamily) -> bool:
    """Every pair of subspaces meets only at the origin."""
    n = len(fam.bases)
    for i in range(n):
        for j in range(i + 1, n):
            if _rank(np.hstack([fam.bases[i], fam.bases[j]])) < fam.dims[i] + fam.dims[j]:
                return False
    return True


@dataclass
class ClassCondition:
    label: int
    sigma_min: float
    max_cos: float
    rhs: float
    margin: float
    satisfied: bool
    full_rank: bool


@dataclass
class ConditionReport:
    """Per-class evaluation of the sufficient recovery condition."""

    lam: float
    classes: list = field(default_factory=list)

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.classes)

    @property
    def min_margin(self) -> float:
        return min(c.margin for c in self.classes)

    def to_dict(self):
        return {"lam": self.lam, "all_satisfied": self.all_satisfied,
                "classes": [asdict(c) for c in self.classes]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def condition_rhs(max_cos, lam, k_c, k_rest) -> float:
    """Right-hand side of the sufficient condition on ``sigma_min(D_c)``."""
    return (lam + (1 - lam) * np.sqrt(k_c)) * max_cos / (lam / np.sqrt(k_rest) + (1 - lam))


def lemma3_report(D: Dictionary, fam: SubspaceFamily | None = None, lam=0.5) -> ConditionReport:
    """Check ``sigma_min(D_c) > (lam + (1-lam) sqrt(K_c)) max_cos / (lam / sqrt(K_-c) + 1 - lam)``.

    ``lam`` is the group-norm share of the merged HiLasso weights
    (``lam`` on group norms, ``1 - lam`` on the l1 norm). Subspaces default to
    the spans of the sub-dictionaries. Rank-deficient sub-dictionaries are
    reported with ``full_rank=False`` rather than rejected.
    """
    if not 0 <= lam <= 1:
        raise InvalidArgumentError(f"lam must lie in [0, 1], got {lam}")
    gs = D.gs
    if gs.n_groups < 2:
        raise InvalidArgumentError("the condition compares at least two classes")
    if fam is None:
        fam = SubspaceFamily.from_dictionary(D)
    if len(fam.bases) != gs.n_groups:
        raise InvalidArgumentError("family size does not match class count")
    report = ConditionReport(lam=float(lam))
    for c in range(1, gs.n_groups + 1):
        Dc = D.sub(c)
        s = np.linalg.svd(Dc, compute_uv=False)
        sigma_min = float(s[-1]) if Dc.shape[1] <= Dc.shape[0] else 0.0
        full_rank = _rank(Dc) == Dc.shape[1]
        max_cos = max(principal_angle_cos(fam.bases[c - 1], fam.bases[o - 1])
                      for o in range(1, gs.n_groups + 1) if o != c)
        rhs = float(condition_rhs(max_cos, lam, gs.size(c), gs.complement_size(c)))
        margin = sigma_min - rhs
        report.classes.append(ClassCondition(c, sigma_min, max_cos, rhs, margin, margin > 0, full_rank))
    return report


def _merged_norm(z, gs, lam):
    return lam * group_norm_sum(z, gs) + (1 - lam) * float(np.abs(z).sum())


def _constrained_code(x, D_sub, gs_sub, lam, cfg):
    lsq, *_ = np.linalg.lstsq(D_sub, x, rcond=None)
    if np.linalg.norm(D_sub @ lsq - x) > 1e-8 * max(np.linalg.norm(x), 1e-300):
        raise InfeasibleError("x is not in the span of the sub-dictionary")
    z = hilasso_encode(x[:, None], Dictionary(D_sub, gs_sub), lam, 1 - lam, cfg)
    return z[:, 0]


# slow penalty growth: the fast default schedule stops short of the optimum
LEMMA2_SOLVER = SolverConfig(mu0=0.1, rho=1.01, mu_max=1e3, max_iters=50000, tol_primal=1e-11)


@dataclass
class Lemma2Result:
    left: float
    right: float
    holds: bool

    def __bool__(self):
        return self.holds


def lemma2_sides(x, D: Dictionary, c1: int, lam=0.5, cfg=LEMMA2_SOLVER, rel_tol=1e-6) -> Lemma2Result:
    """Minimal merged norm of ``x`` over ``D_c1`` versus over ``D_-c1``.

    Both sides are equality-constrained HiLasso problems solved by the exact
    ADMM. ``holds`` requires the left side to be smaller by more than
    ``rel_tol`` (relative), so numerically equal sides do not count.
    """
    x = np.asarray(x, dtype=float).ravel()
    if not np.any(x):
        raise InvalidArgumentError("x must be nonzero")
    if not 0 <= lam <= 1:
        raise InvalidArgumentError(f"lam must lie in [0, 1], got {lam}")
    gs = D.gs
    gs_own = make_groups([gs.size(c1)])
    gs_rest = gs.without(c1)
    z_own = _constrained_code(x, D.sub(c1), gs_own, lam, cfg)
    z_rest = _constrained_code(x, D.complement(c1), gs_rest, lam, cfg)
    left = _merged_norm(z_own, gs_own, lam)
    right = _merged_norm(z_rest, gs_rest, lam)
    return Lemma2Result(left, right, bool(left < right * (1 - rel_tol)))


def lemma2_check(x, D: Dictionary, c1: int, lam=0.5, **kw) -> bool:
    """True when coding ``x`` with its own class is strictly cheaper than with the rest."""
    return lemma2_sides(x, D, c1, lam, **kw).holds


def sample_intersection(D: Dictionary, c1: int, n=1, seed=0):
    """Random unit vectors in ``span(D_c1) ∩ span(D_-c1)``, shape ``(M, n)``.

    Returns an ``(M, 0)`` array when the intersection is trivial.
    """
    B1 = orthonormal_basis(D.sub(c1))
    B2 = orthonormal_basis(D.complement(c1))
    # null space of [B1, -B2] parameterizes the intersection
    _, s, Vt = np.linalg.svd(np.hstack([B1, -B2]))
    tol = RANK_TOL * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    null = Vt[rank:].T
    if null.shape[1] == 0:
        return np.zeros((D.n_features, 0))
    basis = B1 @ null[: B1.shape[1]]
    basis = orthonormal_basis(basis)
    rng = np.random.default_rng(seed)
    X = basis @ rng.standard_normal((basis.shape[1], n))
    return X / np.linalg.norm(X, axis=0)


def block_support(A, labels, gs: GroupStructure, tol=1e-6):
    """Per-column block-support test.

    Column ``i`` passes when its mass outside group ``labels[i]`` is at most
    ``tol * ||a_i||`` and its in-group part is nonzero. Returns
    ``(passed, off_ratio)`` arrays.
    """
    A = np.asarray(A, dtype=float)
    labels = np.asarray(labels).astype(int).ravel()
    if A.ndim != 2 or A.shape[0] != gs.n_atoms or A.shape[1] != labels.size:
        raise InvalidArgumentError("codes, labels and group structure disagree")
    atom_labels = gs.atom_labels()
    in_mask = atom_labels[:, None] == labels[None, :]
    total = np.linalg.norm(A, axis=0)
    off = np.linalg.norm(np.where(in_mask, 0.0, A), axis=0)
    inside = np.linalg.norm(np.where(in_mask, A, 0.0), axis=0)
    ratio = np.divide(off, total, out=np.zeros_like(off), where=total > 0)
    passed = (off <= tol * total) & (inside > 0)
    return passed, ratio


def verify_block_support(A, labels, gs: GroupStructure, tol=1e-6):
    """Return ``(all_passed, max_off_group_ratio)``."""
    passed, ratio = block_support(A, labels, gs, tol)
    return bool(np.all(passed)), float(ratio.max()) if ratio.size else 0.0


def subspace_residuals(D: Dictionary, fam: SubspaceFamily) -> np.ndarray:
    """``||(I - B_c B_c^T) d_j||`` for every atom ``j`` of class ``c``."""
    out = np.empty(D.n_atoms)
    for c, sl in D.gs.slices():
        B = fam.bases[c - 1]
        Dc = D.atoms[:, sl]
        out[sl] = np.linalg.norm(Dc - B @ (B.T @ Dc), axis=0)
    return out


def verify_subspace_consistency(D_before: Dictionary, D_after: Dictionary,
                                fam: SubspaceFamily, tol=1e-8) -> bool:
    """Atoms that started inside their class subspace are still inside it.

    Atoms whose before-residual already exceeded ``tol`` are not judged.
    """
    before = subspace_residuals(D_before, fam)
    after = subspace_residuals(D_after, fam)
    judged = before <= tol
    return bool(np.all(after[judged] <= tol))
