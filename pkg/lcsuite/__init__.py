from lcsuite.dgp import DgpConfig, DistortionKind, DistortionSpec, distort, generate
from lcsuite.errors import (
    ConvergenceWarning,
    DataFormatError,
    DegenerateTreeWarning,
    InvalidInputError,
    LcsuiteError,
    MonotonicityWarning,
    OutOfBagError,
    SingleClassError,
)
from lcsuite.locreg import LocRegConfig, smoothed_calibration_curve
from lcsuite.metrics import LabeledScores, auc, brier, compute_metrics, ece, lcs, true_mse
from lcsuite.recalib import fit_recalibrator

__version__ = "0.1.0"

__all__ = (
    "ConvergenceWarning",
    "DataFormatError",
    "DegenerateTreeWarning",
    "DgpConfig",
    "DistortionKind",
    "DistortionSpec",
    "InvalidInputError",
    "LabeledScores",
    "LcsuiteError",
    "LocRegConfig",
    "MonotonicityWarning",
    "OutOfBagError",
    "SingleClassError",
    "auc",
    "brier",
    "compute_metrics",
    "distort",
    "ece",
    "fit_recalibrator",
    "generate",
    "lcs",
    "smoothed_calibration_curve",
    "true_mse",
)
