"""Command-line front end.

Commands: ``train``, ``encode``, ``classify``, ``synth``, ``check``,
``project``. Any flag can also come from a JSON file given with
``--config`` (keys are flag names with dashes or underscores); flags on the
command line win. Exit codes: 0 success, 2 usage or input error, 3
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import build_label_matrix, classify, fit, LinearClassifier
from .coding import dirty_encode_columns, hilasso_encode, training_solver_config
from .errors import InfeasibleError, InvalidArgumentError, NumericalFailureError
from .groups import make_groups
from .io import (ModelFile, load_labels, load_matrix, load_model, random_project,
                 save_labels, save_matrix, save_model)
from .learning import DlConfig, LabeledDataset, train
from .synthetic import SynthSpec, generate, run_sdi_experiment
from .theory import lemma3_report, verify_block_support

logger = logging.getLogger("structdl")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

THREADS_ENV = "STRUCTDL_THREADS"


class UsageError(Exception):
    pass


def parse_groups(text) -> list:
    """``"10,10,12"`` or ``"10x4"`` (four groups of ten) into a list of sizes."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text).strip()
    try:
        if "x" in text:
            size, count = text.split("x")
            return [int(size)] * int(count)
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse group sizes {text!r}") from None


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def resolve_threads(value) -> int:
    """``--threads`` value, else ``$STRUCTDL_THREADS``, else 1; 0 means all cores."""
    if value is None:
        env = os.environ.get(THREADS_ENV)
        if env is None or env.strip() == "":
            return 1
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    value = int(value)
    if value < 0:
        raise UsageError("--threads must be >= 0")
    return (os.cpu_count() or 1) if value == 0 else value


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): "
                         + ", ".join("--" + n.replace("_", "-") for n in missing))


# ---------------------------------------------------------------------------
# commands

def cmd_train(args):
    _need(args, "data", "labels", "groups", "out")
    X = load_matrix(args.data)
    labels = load_labels(args.labels)
    gs = make_groups(parse_groups(args.groups))
    data = LabeledDataset(X, labels)
    lam = args.lam
    lams = [v if v is not None else lam for v in (args.lam1, args.lam2, args.lam3, args.lam4)]
    coder = training_solver_config(lam, lam1=lams[0], lam2=lams[1], lam3=lams[2], lam4=lams[3],
                                   max_iters=args.max_iters, tol_primal=args.tol)
    cfg = DlConfig(mode=args.mode, coder=coder, max_outer_iters=args.max_outer_iters,
                   obj_rel_tol=args.obj_tol, seed=args.seed,
                   threads=resolve_threads(args.threads))
    D, codes, stats = train(data, gs, cfg)
    # the classifier sees only the shared part in GDDL mode
    clf = fit(codes.A, build_label_matrix(labels, gs.n_groups), args.eta)
    manifest = {
        "format": "structdl-model",
        "mode": cfg.mode,
        "group_sizes": list(gs.group_sizes),
        "coder": asdict(coder),
        "eta": clf.eta,
        "seed": cfg.seed,
        "training": {
            "outer_iterations": len(stats),
            "max_outer_iters": cfg.max_outer_iters,
            "obj_rel_tol": cfg.obj_rel_tol,
            "final_objective": stats.objective[-1],
            "n_samples": data.n_samples,
            "n_features": int(X.shape[0]),
        },
    }
    save_model(args.out, ModelFile(manifest, {"D": D.atoms, "W": clf.W}))
    if args.stats:
        with open(args.stats, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["iteration", "objective", "fidelity",
                                                    "reg_a", "reg_b", "unused_atoms"])
            writer.writeheader()
            for row in stats.rows():
                writer.writerow(row)
    print(f"trained {cfg.mode} dictionary: {len(stats)} outer iterations, "
          f"objective {stats.objective[-1]:.6g}")
    return EXIT_OK


def _coder_from_manifest(model: ModelFile):
    from .coding import SolverConfig
    return SolverConfig(**model.manifest["coder"])


def _encode(model: ModelFile, X):
    """Codes of ``X`` under the model: ``(A, B)`` with ``B`` None in HiDL mode."""
    D = model.dictionary
    X = np.asarray(X, dtype=float)
    if X.shape[0] != D.n_features:
        raise InvalidArgumentError(
            f"data has {X.shape[0]} features, model dictionary has {D.n_features}")
    coder = _coder_from_manifest(model)
    if model.mode == "hidl":
        return hilasso_encode(X, D, coder.lam1, coder.lam2, coder), None
    code = dirty_encode_columns(X, D, coder)
    return code.A, code.B


def _b_path(path):
    p = Path(path)
    return p.with_name(p.stem + "_B" + p.suffix)


def cmd_encode(args):
    _need(args, "model", "data", "out")
    model = load_model(args.model)
    A, B = _encode(model, load_matrix(args.data))
    save_matrix(args.out, A)
    if B is not None:
        save_matrix(args.out_b or _b_path(args.out), B)
    return EXIT_OK


def cmd_classify(args):
    _need(args, "model", "out")
    if (args.data is None) == (args.codes is None):
        raise UsageError("give exactly one of --data or --codes")
    model = load_model(args.model)
    if model.W is None:
        raise InvalidArgumentError("model has no classifier weights")
    clf = LinearClassifier(model.W, float(model.manifest.get("eta", 0.0)))
    if args.codes is not None:
        A = load_matrix(args.codes)
    else:
        A, _ = _encode(model, load_matrix(args.data))
    pred = np.atleast_1d(classify(A, clf))
    save_labels(args.out, pred)
    if args.truth:
        truth = load_labels(args.truth)
        if truth.size != pred.size:
            raise InvalidArgumentError(f"{truth.size} true labels for {pred.size} samples")
        print(f"accuracy {np.mean(pred == truth):.6f}")
    return EXIT_OK


def cmd_synth(args):
    _need(args, "out_dir")
    spec = SynthSpec(n_classes=args.classes, n_features=args.features,
                     atoms_per_class=args.atoms_per_class,
                     samples_per_class=args.samples_per_class, sparsity=args.sparsity,
                     snr_db=args.snr_db, seed=args.seed, subspace_dim=args.subspace_dim,
                     nonnegative=args.nonnegative,
                     orthogonal_subspaces=args.orthogonal_subspaces)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.sweep:
        coder = training_solver_config(tol_primal=args.tol)
        cfg = DlConfig(coder=coder, max_outer_iters=args.max_outer_iters,
                       threads=resolve_threads(args.threads))
        rows = run_sdi_experiment(spec, dl_config=cfg, snrs=_float_list(args.snrs),
                                  sparsities=_int_list(args.sparsities), trials=args.trials,
                                  csv_path=out / "sdi_report.csv")
        print(f"wrote {len(rows)} rows to {out / 'sdi_report.csv'}")
        return EXIT_OK
    truth = generate(spec)
    save_matrix(out / "data.sdlm", truth.noisy)
    save_matrix(out / "clean.sdlm", truth.clean)
    save_matrix(out / "dictionary.sdlm", truth.dictionary.atoms)
    save_matrix(out / "codes.sdlm", truth.codes)
    save_labels(out / "labels.txt", truth.labels)
    meta = {"spec": asdict(spec), "group_sizes": list(spec.group_structure.group_sizes),
            "realized_snr_db": None if np.isinf(truth.realized_snr_db) else truth.realized_snr_db}
    (out / "spec.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {truth.noisy.shape[0]}x{truth.noisy.shape[1]} data to {out}")
    return EXIT_OK


def cmd_check(args):
    _need(args, "model")
    model = load_model(args.model)
    D = model.dictionary
    result = lemma3_report(D, lam=args.lam).to_dict()
    if args.codes is not None or args.labels is not None:
        _need(args, "codes", "labels")
        ok, worst = verify_block_support(load_matrix(args.codes), load_labels(args.labels),
                                         D.gs, args.tol)
        result["block_support"] = {"passed": ok, "max_off_group_ratio": worst, "tol": args.tol}
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_project(args):
    _need(args, "data", "out", "target_dim")
    X = random_project(load_matrix(args.data), args.target_dim, args.seed, args.identity)
    save_matrix(args.out, X)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="structdl",
                                     description="Structured dictionary learning tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file supplying flag values")
        p.add_argument("-v", "--verbose", action="count", default=0)
        return p

    p = common(sub.add_parser("train", help="learn a dictionary and classifier"))
    p.add_argument("--data", help="M x N matrix file or CSV (columns are samples)")
    p.add_argument("--labels", help="one 1-based label per line")
    p.add_argument("--groups", help='atoms per class: "10,10,10" or "10x3"')
    p.add_argument("--mode", choices=("hidl", "gddl"), default="hidl")
    p.add_argument("--lam", type=float, default=0.05, help="default for every weight")
    for i, what in enumerate(("row norm on A (HiDL: group norm)", "l1 on B (HiDL: l1)",
                              "group norm on A", "group norm on B"), 1):
        p.add_argument(f"--lam{i}", type=float, help=what)
    p.add_argument("--eta", type=float, help="classifier ridge (default scales with the codes)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-outer-iters", type=int, default=200)
    p.add_argument("--obj-tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=3000, help="ADMM iterations per coding call")
    p.add_argument("--tol", type=float, default=1e-8, help="ADMM tolerance")
    p.add_argument("--threads", type=int, help=f"0 = all cores (env {THREADS_ENV})")
    p.add_argument("--out", help="model file to write")
    p.add_argument("--stats", help="per-iteration CSV to write")
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("encode", help="sparse codes of data under a model"))
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--out", help="codes file (A part for GDDL)")
    p.add_argument("--out-b", help="GDDL B part (default: <out>_B)")
    p.set_defaults(func=cmd_encode)

    p = common(sub.add_parser("classify", help="label data or precomputed codes"))
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--codes", help="codes from `encode` instead of --data")
    p.add_argument("--truth", help="true labels; prints accuracy")
    p.add_argument("--out", help="predicted labels file")
    p.set_defaults(func=cmd_classify)

    p = common(sub.add_parser("synth", help="generate synthetic data or run the SDI sweep"))
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--features", type=int, default=20)
    p.add_argument("--atoms-per-class", type=int, default=10)
    p.add_argument("--samples-per-class", type=int, default=200)
    p.add_argument("--sparsity", type=int, default=3)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--subspace-dim", type=int)
    p.add_argument("--orthogonal-subspaces", action="store_true",
                   help="mutually orthogonal class subspaces (needs --subspace-dim)")
    p.add_argument("--nonnegative", action="store_true", help="nonnegative code coefficients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir")
    p.add_argument("--sweep", action="store_true", help="run the SDI comparison instead")
    p.add_argument("--snrs", default="10,30,50")
    p.add_argument("--sparsities", default="2,5,8")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--max-outer-iters", type=int, default=15)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_synth)

    p = common(sub.add_parser("check", help="recovery condition report (JSON)"))
    p.add_argument("--model")
    p.add_argument("--lam", type=float, default=0.5, help="group-norm share in [0, 1]")
    p.add_argument("--codes")
    p.add_argument("--labels")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = common(sub.add_parser("project", help="random Gaussian projection + normalization"))
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--target-dim", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--identity", action="store_true", help="normalize only")
    p.set_defaults(func=cmd_project)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from ``--config`` so the command line wins."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    values = {}
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        values[dest] = val
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"structdl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"structdl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailureError, np.linalg.LinAlgError) as exc:
        print(f"structdl {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidArgumentError, InfeasibleError, OSError) as exc:
        print(f"structdl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
