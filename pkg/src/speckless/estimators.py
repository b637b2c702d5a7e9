"""Scikit-learn-style estimators wrapping the compression pipelines.

``fit`` runs the calibrated ADMM denoiser on a volume and learns the
CR-corrected model rank (storing the fitted model and diagnostics);
``transform`` applies a decomposition at the learned rank to any volume of
the same shape and returns the de-speckled reconstruction as an ndarray, so
the estimators compose with pipelines that pass plain arrays around.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .admm import MlRank, TtRank
from .decomp import tt_reconstruct, tt_svd_ranks, tucker_als, tucker_reconstruct
from .metrics import _apply_shifts
from .pipeline import despeckle_compress_ml, despeckle_compress_tt
from .tensor import DenseTensor, as_tensor

__all__ = ["TensorTrainCompressor", "TuckerCompressor", "BScanAligner"]


def _resolve_table(table):
    from .calibration import CalibrationTable, default_table

    if table is None:
        return default_table()
    if isinstance(table, CalibrationTable):
        return table
    return CalibrationTable.load(table)


class _CompressorBase(BaseEstimator, TransformerMixin):
    def __init__(self, target_cr=10.0, norm="s23", table=None, decompose_denoised=False):
        self.target_cr = target_cr
        self.norm = norm
        self.table = table
        self.decompose_denoised = decompose_denoised

    def _store(self, x: DenseTensor, outcome) -> None:
        self.dims_ = x.dims
        self.model_ = outcome.model
        self.ranks_ = outcome.model.ranks
        self.achieved_cr_ = outcome.achieved_cr
        self.approx_error_ = outcome.approx_error
        self.trace_ = outcome.admm_trace
        self.denoised_ = outcome.denoised

    def _check_fitted_input(self, x) -> DenseTensor:
        if not hasattr(self, "model_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")
        t = as_tensor(x)
        if t.dims != self.dims_:
            raise ValueError(f"expected dims {self.dims_}, got {t.dims}")
        return t

    def fit_transform(self, X, y=None):
        # reconstruct the fitted model itself (exact pipeline output, also
        # when decompose_denoised changes what transform would refit)
        self.fit(X, y)
        return self._reconstruct(self.model_)


class TensorTrainCompressor(_CompressorBase):
    """De-speckle and compress volumes with a tensor-train model at a
    prescribed compression ratio.

    Parameters mirror the pipeline: ``target_cr`` (> 1), ``norm`` (one of
    s0/s12/s23/s1), ``table`` (None for the bundled calibration, a path, or
    a CalibrationTable), and ``decompose_denoised``.
    """

    def fit(self, X, y=None):
        x = as_tensor(X)
        outcome = despeckle_compress_tt(
            x,
            self.target_cr,
            self.norm,
            _resolve_table(self.table),
            decompose_denoised=self.decompose_denoised,
        )
        self._store(x, outcome)
        return self

    def transform(self, X):
        t = self._check_fitted_input(X)
        return self._reconstruct(tt_svd_ranks(t, TtRank(self.ranks_)))

    @staticmethod
    def _reconstruct(model):
        return tt_reconstruct(model).array


class TuckerCompressor(_CompressorBase):
    """De-speckle and compress volumes with a Tucker model at a prescribed
    compression ratio; parameters as in :class:`TensorTrainCompressor`."""

    def fit(self, X, y=None):
        x = as_tensor(X)
        outcome = despeckle_compress_ml(
            x,
            self.target_cr,
            self.norm,
            _resolve_table(self.table),
            decompose_denoised=self.decompose_denoised,
        )
        self._store(x, outcome)
        return self

    def transform(self, X):
        t = self._check_fitted_input(X)
        return self._reconstruct(tucker_als(t, MlRank(self.ranks_)))

    @staticmethod
    def _reconstruct(model):
        return tucker_reconstruct(model).array


class BScanAligner(BaseEstimator, TransformerMixin):
    """Vertical B-scan alignment as a transformer.

    ``fit(X, heights)`` learns one integer shift per B-scan from the
    peripheral upper-boundary heights (shape I2 x I3); ``transform`` applies
    the learned shifts with zero fill.
    """

    def fit(self, X, heights=None):
        t = as_tensor(X)
        if t.order != 3:
            raise ValueError(f"expected a 3-way volume, got order {t.order}")
        if heights is None:
            raise ValueError("boundary heights are required to fit the aligner")
        i1, i2, i3 = t.dims
        heights = np.asarray(heights, dtype=np.float64)
        if heights.shape != (i2, i3):
            raise ValueError(
                f"boundary heights must have shape {(i2, i3)}, got {heights.shape}"
            )
        if not np.isfinite(heights).all():
            raise ValueError("boundary heights contain missing values")
        edge = max(1, int(round(0.2 * i2)))
        sel = np.r_[0:edge, i2 - edge : i2]
        per_scan = heights[sel, :].mean(axis=0)
        shifts = np.rint(per_scan.mean() - per_scan).astype(int)
        if (np.abs(shifts) >= i1).any():
            raise ValueError("alignment shift exceeds volume height")
        self.dims_ = t.dims
        self.shifts_ = shifts
        return self

    def transform(self, X):
        if not hasattr(self, "shifts_"):
            raise NotFittedError("BScanAligner is not fitted yet")
        t = as_tensor(X)
        if t.dims != self.dims_:
            raise ValueError(f"expected dims {self.dims_}, got {t.dims}")
        return _apply_shifts(t.array, self.shifts_)
