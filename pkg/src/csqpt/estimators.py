"""Scikit-learn style estimators wrapping the tomography routines, so the
reconstructions compose with the wider ecosystem (get_params/set_params,
clone, pipelines)."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _validation as v
from .errors import ConvergenceWarning
from .fock import DensityMatrix, apply_process, truncate_process_tensor
from .homodyne import QuadratureDataset, build_povm
from .mle import MleConfig, bin_dataset, log_likelihood, process_mle, state_mle

__all__ = ["StateTomography", "ProcessTomography"]


def _as_dataset(X, probe_alpha=0j) -> QuadratureDataset:
    if isinstance(X, QuadratureDataset):
        return X
    return QuadratureDataset(v.as_sample_array(X), probe_alpha=probe_alpha)


class StateTomography(BaseEstimator):
    """Maximum-likelihood density-matrix reconstruction from homodyne samples.

    Parameters
    ----------
    dim : Fock truncation of the reconstruction.
    phase_sections, x_bins, x_min, x_max : binning of the measurement record.
    max_iter, rel_tol, dilution : iteration controls of the likelihood ascent.

    After ``fit`` the estimate is available as ``density_matrix_`` together
    with ``converged_``, ``n_iter_`` and ``log_likelihood_``.
    """

    def __init__(self, dim=7, phase_sections=20, x_bins=100, x_min=-5.0, x_max=5.0,
                 max_iter=5000, rel_tol=1e-11, dilution=1.0):
        self.dim = dim
        self.phase_sections = phase_sections
        self.x_bins = x_bins
        self.x_min = x_min
        self.x_max = x_max
        self.max_iter = max_iter
        self.rel_tol = rel_tol
        self.dilution = dilution

    def _povm(self):
        edges = np.linspace(self.x_min, self.x_max, self.x_bins + 1)
        return build_povm(self.phase_sections, edges, self.dim)

    def fit(self, X, y=None):
        """Reconstruct from ``X``: an (n, 2) array of (theta, x) rows or a
        QuadratureDataset."""
        ds = _as_dataset(X)
        self.povm_ = self._povm()
        cfg = MleConfig(max_iter=self.max_iter, rel_tol=self.rel_tol, dilution=self.dilution, dim=self.dim)
        result = state_mle(bin_dataset(ds, self.povm_), self.povm_, cfg)
        if not result.converged:
            warnings.warn(
                f"state reconstruction hit max_iter={self.max_iter} before rel_tol", ConvergenceWarning
            )
        self.density_matrix_ = result.state
        self.converged_ = result.converged
        self.n_iter_ = result.n_iter
        self.log_likelihood_ = result.log_likelihood
        return self

    def score(self, X, y=None):
        """Log-likelihood of new samples under the fitted state."""
        check_is_fitted(self, "density_matrix_")
        counts = bin_dataset(_as_dataset(X), self.povm_)
        return log_likelihood(self.density_matrix_, counts, self.povm_)


class ProcessTomography(BaseEstimator):
    """Maximum-likelihood process-tensor reconstruction from coherent probes.

    ``fit`` expects a sequence of QuadratureDataset (their ``probe_alpha``
    metadata identifies the inputs) or of (alpha, samples) pairs.  After
    fitting, ``process_tensor_`` holds the estimate and ``predict`` applies
    it to arbitrary input states.

    The likelihood is maximized in a Fock space ``dim_margin`` levels larger
    than ``dim`` and the result truncated back: the buffer levels soak up the
    tail structure the data carries beyond the reported truncation.
    """

    def __init__(self, dim=7, dim_margin=2, phase_sections=20, x_bins=100, x_min=-5.0, x_max=5.0,
                 max_iter=5000, rel_tol=1e-12, dilution=0.5):
        self.dim = dim
        self.dim_margin = dim_margin
        self.phase_sections = phase_sections
        self.x_bins = x_bins
        self.x_min = x_min
        self.x_max = x_max
        self.max_iter = max_iter
        self.rel_tol = rel_tol
        self.dilution = dilution

    def _povm(self):
        edges = np.linspace(self.x_min, self.x_max, self.x_bins + 1)
        return build_povm(self.phase_sections, edges, self.dim + self.dim_margin)

    def fit(self, X, y=None):
        self.povm_ = self._povm()
        probes = []
        for item in X:
            if isinstance(item, tuple):
                alpha, data = item
                ds = _as_dataset(data, probe_alpha=alpha)
            else:
                ds = _as_dataset(item)
            probes.append((complex(ds.probe_alpha), bin_dataset(ds, self.povm_)))
        cfg = MleConfig(
            max_iter=self.max_iter, rel_tol=self.rel_tol, dilution=self.dilution,
            dim=self.dim + self.dim_margin,
        )
        result = process_mle(probes, self.povm_, cfg)
        if not result.converged:
            warnings.warn(
                f"process reconstruction hit max_iter={self.max_iter} before rel_tol", ConvergenceWarning
            )
        self.process_tensor_ = truncate_process_tensor(result.tensor, self.dim)
        self.choi_ = self.process_tensor_.choi()
        self.converged_ = result.converged
        self.n_iter_ = result.n_iter
        self.log_likelihood_ = result.log_likelihood
        return self

    def predict(self, rho: DensityMatrix) -> DensityMatrix:
        """Output state of the reconstructed channel for input ``rho``."""
        check_is_fitted(self, "process_tensor_")
        return apply_process(self.process_tensor_, rho)
