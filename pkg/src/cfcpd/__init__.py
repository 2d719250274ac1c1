"""Changepoint detection by minimising cross-fitted (out-of-sample) segment losses."""

from .classifier import ClassifierLossModel, KnnClassifier, KnnClassifierConfig, classifier_loss_model, knn_classifier
from .core import (
    CROSSFIT,
    CROSSFIT_RECYCLED,
    IN_SAMPLE,
    Dataset,
    DetectionResult,
    FoldPlan,
    GroundTruth,
    SegmentCost,
    Segmentation,
    multivariate_data,
    regression_data,
    segments_of,
)
from .crossfit import (
    CostCache,
    SegmentCoster,
    crossfit_cost,
    crossfit_cost_recycled,
    in_sample_cost,
    make_folds,
    segment_cost,
)
from .detector import ChangepointDetector, detect, holdout_tune_global, make_model
from .diagnostics import BiasDecomposition, bias_decomposition, delta_k, oracle_param, xi_of_segment
from .exceptions import (
    CpdError,
    DataError,
    EnumerationLimitError,
    InvalidConfigError,
    NumericError,
    SegmentInfeasibleError,
    TuningFailedError,
    UnsupportedModelError,
)
from .lasso import LambdaGrid, LinearFit, lasso_fit, ls_on_selected, ridgeless_fit
from .models import GaussianMeanModel, LinearModel, Tuning, gaussian_mean_model, linear_model
from .search import SearchConfig, brute_force_solve, dp_solve, loss_curve, select_k_holdout
from .simulation import (
    DgpSpec,
    gen_dgp1,
    gen_dgp2,
    gen_nonparam,
    gen_ridgeless_benign,
    gen_single_cp_linear,
    generate,
    hausdorff,
)

__version__ = "0.1.0"
