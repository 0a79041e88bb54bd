"""Structured sparse coding.

The group structured dirty model splits the code of a class block ``X_c``
into a row-sparse shared part ``A`` and an entry-sparse unique part ``B``,
both confined to few class groups::

    1/2 ||X_c - D(A + B)||_F^2 + lam1 ||A||_{1,2} + lam2 ||B||_{1,1}
        + lam3 sum_g ||A_[g]||_F + lam4 sum_g ||B_[g]||_F

It is solved by ADMM with auxiliaries ``U = A``, ``V = B`` and a growing
penalty ``mu``. Two fidelity treatments are available:

``"exact"``
    The reconstruction is an equality constraint ``X_c = D(A + B)`` with its
    own multiplier; the A/B steps solve with ``D^T D + I``. This is the
    noiseless formulation used by the subspace-recovery checks. With the
    default schedule (``rho = 1.1`` up to ``mu_max = 1e6``) the thresholds
    ``lam / mu`` vanish within a few hundred iterations, so the iterate is
    feasible but its penalty can sit a fraction of a percent above the
    constrained optimum; ``rho`` near 1.01 with a lower cap recovers it.
``"penalized"``
    The quadratic fidelity term is kept in the objective; the A/B steps solve
    with ``D^T D + mu I``. Used for dictionary training, where exact
    reconstruction would leave nothing for the dictionary update to fit.

HiLasso is the same machinery with the shared part switched off and every
column treated as its own task.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from .dictionary import Dictionary
from .errors import InvalidArgumentError, NumericalFailureError
from .groups import GroupStructure
from .prox import ProxThresholds, prox_composite_elem, prox_composite_row

logger = logging.getLogger(__name__)

FIDELITY_MODES = ("exact", "penalized")


@dataclass(frozen=True)
class SolverConfig:
    """ADMM settings and regularization weights.

    Parameters
    ----------
    lam1, lam2, lam3, lam4 : float
        Weights of the row norm on A, the entry-wise l1 norm on B, and the
        group Frobenius norms on A and on B.
    mu0, rho, mu_max : float
        Initial penalty, growth factor applied every iteration, and cap.
    max_iters : int
    tol_primal : float
        Convergence threshold on the constraint residuals, relative to
        ``||X||_F`` (per column for column-wise problems).
    fidelity : {"exact", "penalized"}
    """

    lam1: float = 0.1
    lam2: float = 0.1
    lam3: float = 0.1
    lam4: float = 0.1
    mu0: float = 1.0
    rho: float = 1.1
    mu_max: float = 1e6
    max_iters: int = 500
    tol_primal: float = 1e-5
    fidelity: str = "exact"

    def __post_init__(self):
        for name in ("lam1", "lam2", "lam3", "lam4"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val >= 0):
                raise InvalidArgumentError(f"{name}={val} must be finite and >= 0")
        if not self.rho > 1:
            raise InvalidArgumentError(f"rho must be > 1, got {self.rho}")
        if not self.mu0 > 0:
            raise InvalidArgumentError(f"mu0 must be > 0, got {self.mu0}")
        if not self.mu_max >= self.mu0:
            raise InvalidArgumentError("mu_max must be >= mu0")
        if not self.tol_primal > 0:
            raise InvalidArgumentError("tol_primal must be > 0")
        if int(self.max_iters) < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if self.fidelity not in FIDELITY_MODES:
            raise InvalidArgumentError(f"fidelity must be one of {FIDELITY_MODES}")

    @property
    def weights(self):
        return (self.lam1, self.lam2, self.lam3, self.lam4)

    def with_weights(self, lam1, lam2, lam3, lam4) -> "SolverConfig":
        return replace(self, lam1=lam1, lam2=lam2, lam3=lam3, lam4=lam4)


def training_penalty(lam) -> float:
    """Fixed ADMM penalty used with penalized fidelity: ``clip(10 lam, 0.1, 0.3)``."""
    return min(0.3, max(0.1, 10.0 * lam))


def training_solver_config(lam=0.05, **kw) -> SolverConfig:
    """Penalized-fidelity config tuned for the dictionary-learning inner loop.

    The penalty is held fixed at :func:`training_penalty`, the fastest
    setting found on unit-norm Gaussian dictionaries for lam in 0.01..0.1.
    """
    mu = training_penalty(lam)
    opts = dict(lam1=lam, lam2=lam, lam3=lam, lam4=lam, mu0=mu, mu_max=mu,
                max_iters=3000, tol_primal=1e-8, fidelity="penalized")
    opts.update(kw)
    return SolverConfig(**opts)


@dataclass
class DirtyCode:
    """Shared (``A``) and unique (``B``) parts of a class block's code."""

    A: np.ndarray
    B: np.ndarray
    iterations_run: int
    final_residuals: tuple
    converged: bool = True

    @property
    def combined(self) -> np.ndarray:
        return self.A + self.B


# ---------------------------------------------------------------------------
# objectives

def row_norm_sum(A) -> float:
    """``||A||_{1,2}``: sum of l2 norms of rows."""
    return float(np.linalg.norm(np.atleast_2d(np.asarray(A).T).T, axis=1).sum())


def group_norm_sum(A, gs: GroupStructure, per_column=False) -> float:
    """Sum over class groups of the block Frobenius norm (or per-column l2)."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    total = 0.0
    for _, sl in gs.slices():
        if per_column:
            total += float(np.linalg.norm(A[sl], axis=0).sum())
        else:
            total += float(np.linalg.norm(A[sl]))
    return total


def shared_penalty(A, gs, lam1, lam3) -> float:
    return lam1 * row_norm_sum(A) + lam3 * group_norm_sum(A, gs)


def unique_penalty(B, gs, lam2, lam4) -> float:
    return lam2 * float(np.abs(B).sum()) + lam4 * group_norm_sum(B, gs)


def gddl_objective(X, D: Dictionary, A, B, lams) -> float:
    """Penalized dirty-model objective for one class block."""
    lam1, lam2, lam3, lam4 = lams
    R = np.asarray(X) - D.atoms @ (A + B)
    return (0.5 * float(np.sum(R * R)) + shared_penalty(A, D.gs, lam1, lam3)
            + unique_penalty(B, D.gs, lam2, lam4))


def hilasso_objective(X, D: Dictionary, A, lam1, lam2) -> float:
    """Sum over columns of ``1/2||x - Da||^2 + lam1 sum_g ||a_[g]|| + lam2 ||a||_1``."""
    R = np.asarray(X) - D.atoms @ A
    return (0.5 * float(np.sum(R * R)) + lam1 * group_norm_sum(A, D.gs, per_column=True)
            + lam2 * float(np.abs(A).sum()))


def lasso_objective(X, D, A, lam) -> float:
    atoms = D.atoms if isinstance(D, Dictionary) else np.asarray(D)
    R = np.asarray(X) - atoms @ A
    return 0.5 * float(np.sum(R * R)) + lam * float(np.abs(A).sum())


# ---------------------------------------------------------------------------
# ADMM core

class _SystemSolver:
    """Solves ``(G + s I) Z = R`` with ``G = D^T D`` for the ADMM A/B steps."""

    def __init__(self, gram, exact):
        self.exact = exact
        if exact:
            self._cho = linalg.cho_factor(gram + np.eye(gram.shape[0]))
        else:
            self._evals, self._evecs = linalg.eigh(gram)
            self._evals = np.maximum(self._evals, 0.0)

    def solve(self, rhs, mu):
        if self.exact:
            return linalg.cho_solve(self._cho, rhs)
        Q = self._evecs
        return Q @ ((Q.T @ rhs) / (self._evals + mu)[:, None])


def _col_norms(Z):
    return np.sqrt(np.einsum("ij,ij->j", Z, Z))


# non-finite iterates are detected and raised explicitly; numpy's own warnings
# on the way there are noise
@np.errstate(over="ignore", invalid="ignore")
def _solve_admm(X, D: Dictionary, cfg: SolverConfig, use_shared=True, use_unique=True,
                per_column=False, weights=None):
    """Run the dirty-model ADMM on ``X``.

    Returns ``(U, V, iterations, residuals, converged)`` where ``U``/``V`` are
    the prox outputs (exactly sparse), ``residuals`` is a 3-tuple of
    Frobenius norms ``||A-U||, ||B-V||, ||X-D(A+B)||``. With ``per_column``
    each column is an independent task that stops on its own criterion.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != D.n_features:
        raise InvalidArgumentError(
            f"data has shape {X.shape}, dictionary expects {D.n_features} rows")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("data contains non-finite values")
    exact = cfg.fidelity == "exact"
    lam_row, lam_elem, lam_ga, lam_gb = cfg.weights if weights is None else weights
    if not use_shared:
        lam_row = lam_ga = 0.0
    if not use_unique:
        lam_elem = lam_gb = 0.0
    if exact:
        # the constrained minimizer is invariant to a common scaling of the weights
        top = max(lam_row, lam_elem, lam_ga, lam_gb)
        if top > 0:
            lam_row, lam_elem, lam_ga, lam_gb = (w / top for w in (lam_row, lam_elem, lam_ga, lam_gb))

    K, N = D.n_atoms, X.shape[1]
    Dm = D.atoms
    gram = Dm.T @ Dm
    DtX = Dm.T @ X
    system = _SystemSolver(gram, exact)
    gs = D.gs

    A = np.zeros((K, N)); B = np.zeros((K, N))
    U = np.zeros((K, N)); V = np.zeros((K, N))
    Y1 = np.zeros((K, N)); Y2 = np.zeros((K, N)); Y3 = np.zeros((D.n_features, N))

    if per_column:
        scale = _col_norms(X)
    else:
        scale = np.array([np.linalg.norm(X)])
    thresh = cfg.tol_primal * scale
    active = np.ones(N, dtype=bool)
    done_at = np.zeros(N, dtype=int)
    mu = cfg.mu0
    it = 0
    for it in range(1, int(cfg.max_iters) + 1):
        idx = np.flatnonzero(active) if per_column else slice(None)
        k = ProxThresholds.from_weights(lam_row, lam_elem, lam_ga, lam_gb, mu)
        a, b, y1, y2, y3 = A[:, idx], B[:, idx], Y1[:, idx], Y2[:, idx], Y3[:, idx]
        dtx = DtX[:, idx]

        if use_shared:
            u = prox_composite_row(a + y1, gs, k.group_a, k.row, per_column)
            if exact:
                rhs = dtx + Dm.T @ y3 - gram @ b + u - y1
            else:
                rhs = dtx - gram @ b + mu * (u - y1)
            a = system.solve(rhs, mu)
        else:
            u = a
        if use_unique:
            v = prox_composite_elem(b + y2, gs, k.group_b, k.elem, per_column)
            if exact:
                rhs = dtx + Dm.T @ y3 - gram @ a + v - y2
            else:
                rhs = dtx - gram @ a + mu * (v - y2)
            b = system.solve(rhs, mu)
        else:
            v = b

        r1 = a - u
        r2 = b - v
        r3 = X[:, idx] - Dm @ (a + b)
        y1 = y1 + r1
        y2 = y2 + r2
        if exact:
            y3 = y3 + r3

        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))
                and np.all(np.isfinite(y1)) and np.all(np.isfinite(y2)) and np.all(np.isfinite(y3))):
            raise NumericalFailureError(f"non-finite iterate at ADMM iteration {it}", iteration=it)

        # dual residual for the penalized form: change in the sparse iterates
        if per_column:
            rn = [_col_norms(r1), _col_norms(r2)]
            if exact:
                rn.append(_col_norms(r3))
            else:
                rn.append(mu * np.sqrt(_col_norms(u - U[:, idx]) ** 2 + _col_norms(v - V[:, idx]) ** 2))
            ok = np.all([r <= thresh[idx] for r in rn], axis=0)
        else:
            rn = [np.linalg.norm(r1), np.linalg.norm(r2)]
            if exact:
                rn.append(np.linalg.norm(r3))
            else:
                rn.append(mu * np.sqrt(np.linalg.norm(u - U) ** 2 + np.linalg.norm(v - V) ** 2))
            ok = np.array([all(r <= thresh[0] for r in rn)])

        A[:, idx], B[:, idx], U[:, idx], V[:, idx] = a, b, u, v
        new_mu = min(cfg.mu_max, cfg.rho * mu)
        # keep the unscaled multipliers fixed when mu changes
        ratio = mu / new_mu
        Y1[:, idx], Y2[:, idx], Y3[:, idx] = y1 * ratio, y2 * ratio, y3 * ratio
        mu = new_mu

        if per_column:
            finished = np.flatnonzero(active)[ok]
            done_at[finished] = it
            active[finished] = False
            if not active.any():
                break
        elif ok[0]:
            break

    converged = not active.any() if per_column else bool(ok[0])
    if not converged:
        logger.debug("ADMM hit max_iters=%d without meeting tolerance", cfg.max_iters)
    if not use_shared:
        U = np.zeros((K, N)); A = U
    if not use_unique:
        V = np.zeros((K, N)); B = V
    residuals = (float(np.linalg.norm(A - U)), float(np.linalg.norm(B - V)),
                 float(np.linalg.norm(X - Dm @ (A + B))))
    iters = int(done_at.max()) if (per_column and converged) else it
    return U, V, iters, residuals, converged


# ---------------------------------------------------------------------------
# public coders

def reconcile_group_selection(code: DirtyCode, gs: GroupStructure) -> DirtyCode:
    """Restrict ``B`` to the class group selected by the shared part ``A``.

    The winning group maximizes ``||A_[g]||_F`` (lowest index on ties). When
    ``A`` is identically zero the dominant group of ``B`` is kept instead.
    """
    A, B = code.A, code.B
    if A.shape[0] != gs.n_atoms or B.shape != A.shape:
        raise InvalidArgumentError("code shape does not match group structure")
    src = A if np.any(A != 0) else B
    if not np.any(src != 0):
        return code
    norms = [np.linalg.norm(src[sl]) for _, sl in gs.slices()]
    winner = int(np.argmax(norms)) + 1
    keep = gs.slice(winner)
    B_new = np.zeros_like(B)
    B_new[keep] = B[keep]
    return replace(code, B=B_new)


def gddl_encode(X_c, D: Dictionary, cfg: SolverConfig, reconcile=True,
                shared=True) -> DirtyCode:
    """Group structured dirty-model coding of one class block ``X_c``.

    ``shared=False`` switches the A-branch off (``A = 0``), which with
    ``lam1 = lam3 = 0`` leaves collaborative HiLasso on ``B``.
    """
    U, V, iters, res, conv = _solve_admm(X_c, D, cfg, use_shared=shared)
    code = DirtyCode(U, V, iters, res, conv)
    if reconcile:
        code = reconcile_group_selection(code, D.gs)
    return code


def dirty_encode_columns(X, D: Dictionary, cfg: SolverConfig) -> DirtyCode:
    """Dirty-model coding with each column as its own single-task block.

    Used at test time, where labels (and therefore class blocks) are unknown.
    For a single column the row norm is the l1 norm, so when the shared and
    unique parts carry equal weights (``lam1 == lam2`` and ``lam3 == lam4``)
    the penalty is subadditive with equality at ``B = 0``; the problem then
    reduces exactly to HiLasso and the whole code goes to ``A``. The split is
    not unique in that case and plain ADMM wanders along the flat direction.
    """
    lam1, lam2, lam3, lam4 = cfg.weights
    if lam1 == lam2 and lam3 == lam4:
        Z, info = hilasso_encode(X, D, lam3, lam1, cfg, return_info=True)
        return DirtyCode(Z, np.zeros_like(Z), info.iterations_run,
                         info.final_residuals, info.converged)
    U, V, iters, res, conv = _solve_admm(X, D, cfg, per_column=True)
    B = np.zeros_like(V)
    for i in range(U.shape[1]):
        single = reconcile_group_selection(
            DirtyCode(U[:, i:i + 1], V[:, i:i + 1], iters, res), D.gs)
        B[:, i] = single.B[:, 0]
    return DirtyCode(U, B, iters, res, conv)


def hilasso_encode(X, D: Dictionary, lam1, lam2, cfg: SolverConfig | None = None,
                   return_info=False):
    """HiLasso coding, one independent task per column.

    ``lam1`` weights the per-column group norms, ``lam2`` the entry-wise l1
    norm. The regularization weights stored in ``cfg`` are ignored. The
    default config uses the penalized fidelity; pass an exact-fidelity config
    for the equality-constrained (noiseless) problem.
    """
    cfg = cfg or training_solver_config()
    U, V, iters, res, conv = _solve_admm(
        X, D, cfg, use_shared=False, per_column=True, weights=(0.0, lam2, 0.0, lam1))
    if return_info:
        return V, DirtyCode(U, V, iters, res, conv)
    return V


@np.errstate(over="ignore", invalid="ignore")
def lasso_encode(X, D, lam, cfg: SolverConfig | None = None):
    """Plain l1 coding by accelerated iterative soft-thresholding.

    Step size ``1 / ||D||_2^2``; stops when the relative change of the
    iterate falls below ``cfg.tol_primal`` or after ``cfg.max_iters``.
    """
    cfg = cfg or SolverConfig(max_iters=5000, tol_primal=1e-10)
    atoms = D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=float)
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    if X.shape[0] != atoms.shape[0]:
        raise InvalidArgumentError("data and dictionary row counts differ")
    if lam < 0:
        raise InvalidArgumentError("lam must be >= 0")
    gram = atoms.T @ atoms
    L = float(np.linalg.eigvalsh(gram)[-1]) if gram.size else 0.0
    A = np.zeros((atoms.shape[1], X.shape[1]))
    if L <= 0:
        return A[:, 0] if squeeze else A
    DtX = atoms.T @ X
    step = 1.0 / L
    Z = A.copy()
    t = 1.0
    for it in range(1, int(cfg.max_iters) + 1):
        grad = gram @ Z - DtX
        W = Z - step * grad
        A_new = np.sign(W) * np.maximum(np.abs(W) - step * lam, 0.0)
        if not np.all(np.isfinite(A_new)):
            raise NumericalFailureError(f"non-finite iterate at ISTA iteration {it}", iteration=it)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        delta = A_new - A
        # restart momentum when it points uphill
        if np.sum(delta * (Z - A_new)) > 0:
            t_new = 1.0
            Z = A_new
        else:
            Z = A_new + ((t - 1.0) / t_new) * delta
        change = np.linalg.norm(delta)
        A = A_new
        t = t_new
        if change <= cfg.tol_primal * max(np.linalg.norm(A), 1e-300):
            break
    return A[:, 0] if squeeze else A
