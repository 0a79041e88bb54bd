"""Class-structured dictionary learning with hierarchical and dirty-model sparse coding."""

__version__ = "0.1.0"

from .classifier import LinearClassifier, build_label_matrix, classify, fit, sdi
from .coding import (DirtyCode, SolverConfig, dirty_encode_columns, gddl_encode,
                     hilasso_encode, lasso_encode, reconcile_group_selection,
                     training_solver_config)
from .dictionary import Dictionary, normalize_columns
from .errors import InfeasibleError, InvalidArgumentError, NumericalFailureError
from .groups import GroupStructure, extract_group, group_of, make_groups
from .learning import Codes, DlConfig, LabeledDataset, TrainStats, train, update_atom
from .prox import (prox_composite_elem, prox_composite_row, prox_elementwise_l1,
                   prox_group_frobenius, prox_row_l2)
from .synthetic import SynthSpec, SynthTruth, generate, run_sdi_experiment, split
from .theory import (SubspaceFamily, check_disjoint, check_independent, lemma2_check,
                     lemma3_report, principal_angle_cos, verify_block_support,
                     verify_subspace_consistency)

__all__ = [
    "Codes", "Dictionary", "DirtyCode", "DlConfig", "GroupStructure", "InfeasibleError",
    "InvalidArgumentError", "LabeledDataset", "LinearClassifier", "NumericalFailureError",
    "SolverConfig", "SubspaceFamily", "SynthSpec", "SynthTruth", "TrainStats",
    "build_label_matrix", "check_disjoint", "check_independent", "classify",
    "dirty_encode_columns", "extract_group", "fit", "gddl_encode", "generate", "group_of",
    "hilasso_encode", "lasso_encode", "lemma2_check", "lemma3_report", "make_groups",
    "normalize_columns", "principal_angle_cos", "prox_composite_elem", "prox_composite_row",
    "prox_elementwise_l1", "prox_group_frobenius", "prox_row_l2", "reconcile_group_selection",
    "run_sdi_experiment", "sdi", "split", "train", "training_solver_config", "update_atom",
    "verify_block_support", "verify_subspace_consistency",
]
