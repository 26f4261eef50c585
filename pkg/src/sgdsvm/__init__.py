"""Primal L1-SVM training by stochastic subgradient descent recast as a
perceptron with a linearly growing margin threshold, with a dual lower bound
that certifies the relative accuracy reached."""

from .data import (
    AugReflPattern,
    Dataset,
    LabeledExample,
    SparseVector,
    augment_reflect,
    load_dataset,
    load_libsvm,
    make_synthetic,
    parse_libsvm,
    scale_features,
    serialize_libsvm,
)
from .engine import (
    Hyperparams,
    ModelState,
    margin_condition,
    multiple_update,
    multiplicity,
    run_epoch,
    run_sgd_m,
    run_sgd_r,
    run_sgd_s,
    sgd_m_schedule,
    single_update,
    train,
)
from .modelfile import Model
from .objective import (
    Decision,
    EpochMetrics,
    approximate_objective,
    dual_lagrangian,
    norm_bound_check,
    primal_objective,
    reference_solve,
    stopping_check,
)
from .report import TrainReport

__version__ = "0.1.0"
