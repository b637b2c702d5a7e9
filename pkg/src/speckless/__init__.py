"""speckless: joint de-speckling and compression of 3-D volumes.

Low tensor-train-rank and low multilinear-rank ADMM denoising with
Schatten-p singular-value thresholding, followed by TT-SVD or Tucker-ALS
model fitting at a user-prescribed compression ratio.
"""

from .admm import (
    AdmmConfig,
    AdmmTrace,
    MlRank,
    TtRank,
    denoise_ml,
    denoise_tt,
    ml_weights,
    tt_weights,
)
from .calibration import (
    CalibrationSample,
    CalibrationTable,
    CalibrationWarning,
    calibrate,
    default_table,
    interpolate_mu,
)
from .decomp import (
    TTModel,
    TuckerModel,
    tt_reconstruct,
    tt_svd_eps,
    tt_svd_ranks,
    tucker_als,
    tucker_reconstruct,
)
from .estimators import BScanAligner, TensorTrainCompressor, TuckerCompressor
from .metrics import (
    RegionMask,
    SurfaceSet,
    align_bscans,
    cnr,
    relative_error,
    segmentation_error,
    snr,
)
from .phantom import SpeckledPhantomSpec, layered_phantom_spec, make_phantom
from .pipeline import (
    CompressionOutcome,
    RankCorrectionWarning,
    correct_ml_rank,
    correct_tt_rank,
    cr_ml,
    cr_tt,
    despeckle_compress_ml,
    despeckle_compress_tt,
    natural_cr,
)
from .prox import SpNorm, SvtResult, prox_array, prox_oracle, prox_scalar, svt
from .tensor import (
    DenseTensor,
    as_tensor,
    contracted_product,
    fold_canonical,
    fold_mode_n,
    frobenius_norm,
    mode_n_product,
    unfold_canonical,
    unfold_mode_n,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "AdmmTrace",
    "BScanAligner",
    "CalibrationSample",
    "CalibrationTable",
    "CalibrationWarning",
    "CompressionOutcome",
    "DenseTensor",
    "MlRank",
    "RankCorrectionWarning",
    "RegionMask",
    "SpNorm",
    "SpeckledPhantomSpec",
    "SurfaceSet",
    "SvtResult",
    "TTModel",
    "TensorTrainCompressor",
    "TtRank",
    "TuckerCompressor",
    "TuckerModel",
    "__version__",
    "align_bscans",
    "as_tensor",
    "calibrate",
    "cnr",
    "contracted_product",
    "correct_ml_rank",
    "correct_tt_rank",
    "cr_ml",
    "cr_tt",
    "default_table",
    "denoise_ml",
    "denoise_tt",
    "despeckle_compress_ml",
    "despeckle_compress_tt",
    "fold_canonical",
    "fold_mode_n",
    "frobenius_norm",
    "interpolate_mu",
    "layered_phantom_spec",
    "make_phantom",
    "ml_weights",
    "mode_n_product",
    "natural_cr",
    "prox_array",
    "prox_oracle",
    "prox_scalar",
    "relative_error",
    "segmentation_error",
    "snr",
    "svt",
    "tt_reconstruct",
    "tt_svd_eps",
    "tt_svd_ranks",
    "tt_weights",
    "tucker_als",
    "tucker_reconstruct",
    "unfold_canonical",
    "unfold_mode_n",
]
