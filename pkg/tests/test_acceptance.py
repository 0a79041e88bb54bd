"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Thresholds are the ones stated in the acceptance list. Runtime is dominated
by criterion 7 (about 14 minutes on one core).
"""

import logging
import time
from dataclasses import replace

import numpy as np
import pytest

from oracles import dirty_oracle, group_term, prox_oracle, random_instance, SOLVER_OPTS
from structdl.classifier import build_label_matrix, fit
from structdl.cli import main as cli_main
from structdl.coding import (SolverConfig, gddl_encode, gddl_objective, hilasso_encode,
                             training_solver_config)
from structdl.dictionary import Dictionary, normalize_columns
from structdl.groups import make_groups
from structdl.io import load_model, matrix_from_bytes, matrix_to_bytes, ModelFile
from structdl.learning import DlConfig, train
from structdl.prox import (prox_composite_elem, prox_composite_row, prox_elementwise_l1,
                          prox_group_frobenius, prox_row_l2)
from structdl.synthetic import SynthSpec, generate, run_method, run_sdi_experiment, split, summarize
from structdl.theory import (SubspaceFamily, check_independent, lemma3_report,
                             subspace_residuals, verify_block_support)

log = logging.getLogger("acceptance")

# equality-constrained coding with slow penalty growth (oracle grade)
CONSTRAINED = SolverConfig(mu0=0.1, rho=1.01, mu_max=1e3, max_iters=50000, tol_primal=1e-11)


def class_block(rng, D, c, n, s):
    sl = D.gs.slice(c)
    A = np.zeros((D.n_atoms, n))
    for i in range(n):
        A[sl.start + rng.choice(sl.stop - sl.start, s, replace=False), i] = rng.standard_normal(s)
    return D.atoms @ A


# ---------------------------------------------------------------------------

def test_criterion_1_prox_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    ops = {
        "row": lambda V, gs, kg, ki: prox_row_l2(V, ki),
        "elem": lambda V, gs, kg, ki: prox_elementwise_l1(V, ki),
        "group": lambda V, gs, kg, ki: prox_group_frobenius(V, gs, kg),
        "composite_row": lambda V, gs, kg, ki: prox_composite_row(V, gs, kg, ki),
        "composite_elem": lambda V, gs, kg, ki: prox_composite_elem(V, gs, kg, ki),
    }
    worst = {k: 0.0 for k in ops}
    for kind, op in ops.items():
        for _ in range(100):
            V, gs = random_instance(rng, kmax=12, nmax=6)
            kg, ki = rng.uniform(0, 1.5, 2)
            err = np.linalg.norm(op(V, gs, kg, ki) - prox_oracle(kind, V, gs, kg, ki))
            worst[kind] = max(worst[kind], err)
    secs = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-6 and secs < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(1, ok, f"max Frobenius error per operator over 100 instances: {detail} ({secs:.0f}s)")
    assert ok


def test_criterion_2_admm(verdict):
    import cvxpy as cp

    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    gs = make_groups([8, 8, 8])
    D = Dictionary(normalize_columns(rng.standard_normal((20, 24))), gs)
    X = class_block(rng, D, 2, 30, 3)
    cfg = SolverConfig(lam1=1.0, lam2=0.5, lam3=0.5, lam4=0.5, max_iters=500, tol_primal=1e-7)
    code = gddl_encode(X, D, cfg, reconcile=False)
    res_ok = max(code.final_residuals) < 1e-4 and code.iterations_run <= 500
    obj = gddl_objective(X, D, code.A, code.B, cfg.weights)
    zero = gddl_objective(X, D, 0 * code.A, 0 * code.B, cfg.weights)

    # degenerate weights on a noisy block, penalized fidelity
    Y = class_block(rng, D, 1, 10, 3) + 0.05 * rng.standard_normal((20, 10))
    tight = dict(max_iters=20000, tol_primal=1e-10)
    ch = training_solver_config(lam1=0.0, lam2=0.05, lam3=0.0, lam4=0.1, **tight)
    code_ch = gddl_encode(Y, D, ch, reconcile=False, shared=False)
    B = cp.Variable(code_ch.B.shape)
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(Y - D.atoms @ B)
                                  + 0.05 * cp.sum(cp.abs(B)) + 0.1 * group_term(B, gs)))
    prob.solve(**SOLVER_OPTS)
    gap_ch = abs(gddl_objective(Y, D, code_ch.A, code_ch.B, ch.weights) - prob.value)

    D1 = Dictionary(D.atoms[:, :12], make_groups([12]))
    dm = training_solver_config(lam1=0.3, lam2=0.05, lam3=0.0, lam4=0.0, **tight)
    code_dm = gddl_encode(Y, D1, dm)
    gap_dm = abs(gddl_objective(Y, D1, code_dm.A, code_dm.B, dm.weights)
                 - dirty_oracle(Y, D1.atoms, 0.3, 0.05))
    secs = time.perf_counter() - t0
    ok = res_ok and obj < zero and gap_ch <= 1e-6 and gap_dm <= 1e-6 and secs < 120
    verdict(2, ok, f"residuals {max(code.final_residuals):.1e} after {code.iterations_run} its, "
                   f"objective {obj:.4f} < {zero:.4f}; C-HiLasso gap {gap_ch:.1e}, "
                   f"Dirty Model gap {gap_dm:.1e} ({secs:.0f}s)")
    assert ok


def test_criterion_3_block_recovery(verdict):
    t0 = time.perf_counter()
    # four independent (not orthogonal) 4-dim class subspaces in R^20
    spec = SynthSpec(n_classes=4, n_features=20, atoms_per_class=4, samples_per_class=50,
                     sparsity=2, subspace_dim=4, seed=103)
    truth = generate(spec)
    assert check_independent(SubspaceFamily(truth.bases))
    Z = hilasso_encode(truth.clean, truth.dictionary, 0.5, 0.5, CONSTRAINED)
    ok_all, worst = verify_block_support(Z, truth.labels, spec.group_structure, tol=1e-6)
    secs = time.perf_counter() - t0
    ok = ok_all and Z.shape[1] == 200 and secs < 60
    verdict(3, ok, f"200 columns, max off-group ratio {worst:.1e} ({secs:.0f}s)")
    assert ok


def test_criterion_4_condition_sufficiency(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    lam = 0.5
    n_inst = n_drawn = 0
    failures = []
    while n_inst < 100:
        n_drawn += 1
        C = int(rng.integers(2, 4))
        Kc = int(rng.integers(2, 4))
        M = int(rng.integers(C * Kc + 2, 25))
        gs = make_groups([Kc] * C)
        D = Dictionary(normalize_columns(rng.standard_normal((M, C * Kc))), gs)
        rep = lemma3_report(D, lam=lam)
        if not rep.all_satisfied:
            continue
        n_inst += 1
        labels = np.repeat(np.arange(1, C + 1), 5)
        A = np.zeros((C * Kc, labels.size))
        for c, sl in gs.slices():
            A[sl, labels == c] = rng.standard_normal((Kc, 5))
        Z = hilasso_encode(D.atoms @ A, D, lam, 1 - lam, CONSTRAINED)
        passed, worst = verify_block_support(Z, labels, gs, tol=1e-6)
        if not passed:
            failures.append((rep.min_margin, worst))
            log.warning("instance %d failed: margin %.3e, off-group ratio %.3e",
                        n_inst, rep.min_margin, worst)
    rate = 1 - len(failures) / n_inst
    secs = time.perf_counter() - t0
    ok = rate >= 0.95 and secs < 300
    verdict(4, ok, f"{n_inst} instances with positive margin (of {n_drawn} drawn), "
                   f"recovery rate {rate:.2f}, failures {failures} ({secs:.0f}s)")
    assert ok


def test_criterion_5_subspace_consistency(verdict):
    t0 = time.perf_counter()
    # orthogonal class subspaces: off-class atoms see no residual, so block codes are optimal
    spec = SynthSpec(n_classes=3, n_features=20, atoms_per_class=4, samples_per_class=20,
                     sparsity=2, subspace_dim=4, orthogonal_subspaces=True, seed=105)
    truth = generate(spec)
    fam = SubspaceFamily(truth.bases)
    worst_atom, worst_code = [], []

    def cb(t, before, after, codes):
        worst_atom.append(subspace_residuals(after, fam).max())
        worst_code.append(verify_block_support(codes.A, truth.labels, spec.group_structure)[1])

    coder = training_solver_config(0.05, max_iters=20000, tol_primal=1e-10)
    train(truth.dataset, spec.group_structure,
          DlConfig(coder=coder, max_outer_iters=20, obj_rel_tol=1e-15), callback=cb)
    secs = time.perf_counter() - t0
    ok = len(worst_atom) == 20 and max(worst_atom) < 1e-8 and secs < 120
    verdict(5, ok, f"{len(worst_atom)} iterations, max atom residual {max(worst_atom):.1e}, "
                   f"max off-block code ratio {max(worst_code):.1e} ({secs:.0f}s)")
    assert ok


def test_criterion_6_dictionary_invariants(verdict):
    t0 = time.perf_counter()
    spec = SynthSpec(n_classes=3, n_features=20, atoms_per_class=6, samples_per_class=30,
                     sparsity=3, seed=106)
    truth = generate(spec)
    worst_norm, worst_rise = 0.0, -np.inf
    for mode in ("hidl", "gddl"):
        norms = []

        def cb(t, before, after, codes):
            norms.append(np.abs(after.atom_norms() - 1).max())

        coder = training_solver_config(0.05, max_iters=20000, tol_primal=1e-11)
        _, _, stats = train(truth.dataset, spec.group_structure,
                            DlConfig(mode=mode, coder=coder, max_outer_iters=15,
                                     obj_rel_tol=1e-15), callback=cb)
        worst_norm = max(worst_norm, max(norms))
        worst_rise = max(worst_rise, float(np.diff(stats.objective).max()))
    secs = time.perf_counter() - t0
    ok = worst_norm < 1e-10 and worst_rise <= 1e-8
    verdict(6, ok, f"max |norm-1| {worst_norm:.1e}, largest objective increase "
                   f"{worst_rise:.1e} over HiDL and GDDL runs ({secs:.0f}s)")
    assert ok


def test_criterion_7_sdi_direction(verdict):
    t0 = time.perf_counter()
    spec = SynthSpec(n_classes=4, n_features=20, atoms_per_class=10, samples_per_class=200,
                     seed=107)
    cfg = DlConfig(max_outer_iters=15, coder=training_solver_config(tol_primal=1e-5))
    rows = run_sdi_experiment(spec, dl_config=cfg, snrs=(10.0, 30.0, 50.0),
                              sparsities=(2, 5, 8), trials=5)
    means = summarize(rows)
    bad = []
    for s in (2, 5, 8):
        for snr in (10.0, 30.0, 50.0):
            base = min(means[("lasso-separate", snr, s)], means[("lasso-all", snr, s)])
            cell = {m: means[(m, snr, s)] for m in ("hidl", "gddl", "lasso-separate", "lasso-all")}
            log.warning("SDI s=%d snr=%g: %s", s, snr,
                        ", ".join(f"{k} {v:.4f}" for k, v in cell.items()))
            for m in ("hidl", "gddl"):
                if not cell[m] < base:
                    bad.append(f"{m}@s={s},snr={snr:g}")
        # soft expectation, logged only
        if s == 5:
            for snr in (10.0, 30.0, 50.0):
                log.warning("GDDL <= HiDL at s=5, snr=%g: %s", snr,
                            means[("gddl", snr, 5)] <= means[("hidl", snr, 5)])
    secs = time.perf_counter() - t0
    ok = not bad and secs < 900
    verdict(7, ok, f"{18 - len(bad)}/18 (method, cell) pairs below both l1 baselines; "
                   f"violations: {bad or 'none'} ({secs:.0f}s)")
    assert ok


def test_criterion_8_classification(verdict):
    t0 = time.perf_counter()
    accs = {}
    for seed in range(5):
        spec = SynthSpec(n_classes=4, n_features=20, atoms_per_class=5, samples_per_class=100,
                         sparsity=3, subspace_dim=5, orthogonal_subspaces=True,
                         nonnegative=True, seed=seed)
        train_set, test_set = split(generate(spec), 0.5, seed=seed)
        cfg = DlConfig(max_outer_iters=30, coder=training_solver_config(0.05, tol_primal=1e-6))
        for method in ("hidl", "gddl"):
            m = run_method(method, train_set, test_set, spec.group_structure, 0.05, cfg, seed=seed)
            accs[(method, seed)] = m["accuracy"]
    secs = time.perf_counter() - t0
    ok = min(accs.values()) >= 0.95 and secs < 300
    verdict(8, ok, "test accuracy " + ", ".join(f"{m}/{s} {a:.3f}" for (m, s), a in accs.items())
            + f" ({secs:.0f}s)")
    assert ok


def test_criterion_9_classifier_algebra(verdict):
    rng = np.random.default_rng(109)
    A = rng.standard_normal((12, 80))
    labels = rng.integers(1, 5, 80)
    L = build_label_matrix(labels, 4)
    clf = fit(A, L, eta=0.2)
    station = np.linalg.norm((A @ A.T + 0.2 * np.eye(12)) @ clf.W.T - A @ L.T)

    sizes = [3, 4, 5]
    gs = make_groups(sizes)
    blabels = np.repeat([1, 2, 3], 20)
    Ab = np.zeros((12, 60))
    for c, sl in gs.slices():
        Ab[sl, blabels == c] = rng.standard_normal((sizes[c - 1], 20))
    W = fit(Ab, build_label_matrix(blabels, 3), eta=0.5).W
    off = max(np.abs(np.delete(W[c - 1], np.arange(sl.start, sl.stop))).max()
              for c, sl in gs.slices())
    ok = station < 1e-8 and off < 1e-10
    verdict(9, ok, f"stationarity {station:.1e}, max off-block weight {off:.1e}")
    assert ok


def test_criterion_10_determinism(verdict, tmp_path):
    data = tmp_path / "syn"
    assert cli_main(["synth", "--classes", "3", "--features", "12", "--atoms-per-class", "3",
                     "--samples-per-class", "10", "--sparsity", "2", "--snr-db", "30",
                     "--out-dir", str(data)]) == 0
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.sdl"
        assert cli_main(["train", "--data", str(data / "data.sdlm"),
                         "--labels", str(data / "labels.txt"), "--groups", "3x3",
                         "--mode", "gddl", "--max-outer-iters", "3", "--seed", "5",
                         "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    same_model = blobs[0] == blobs[1]
    model = load_model(tmp_path / "a.sdl")
    round_trip = ModelFile.from_bytes(model.to_bytes()).to_bytes() == blobs[0]
    rng = np.random.default_rng(110)
    mats = [rng.standard_normal((5, 7)), np.array([[np.inf, -0.0], [1e-310, np.pi]])]
    bitwise = all(matrix_from_bytes(matrix_to_bytes(M)).tobytes() == M.tobytes() for M in mats)
    ok = same_model and round_trip and bitwise
    verdict(10, ok, f"identical model bytes {same_model}, model round-trip {round_trip}, "
                    f"matrix round-trip {bitwise}")
    assert ok
