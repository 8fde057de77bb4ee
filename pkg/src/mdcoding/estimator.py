"""scikit-learn style facade over the annealing encoder.

A single sequence is one "sample set": ``fit`` anneals it and packages the two
descriptions, ``transform`` returns the reconstructions as rows ``(y, z, w)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .annealer import AnnealSchedule
from .energy import DistortionMeasure, LagrangianWeights, compute_energy
from .exceptions import InvalidInputError
from .pipeline import md_decode_central, md_decode_side, md_encode
from .validation import check_sequence

__all__ = ["MultipleDescriptionCoder"]


def _as_sequence(X) -> np.ndarray:
    arr = np.asarray(X)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    return check_sequence(arr, name="X")


class MultipleDescriptionCoder(TransformerMixin, BaseEstimator):
    """Two-description lossy coder for a discrete sequence.

    Parameters
    ----------
    k, k1 : int
        Context order and side-window half-width.
    gamma1, gamma2, gamma0, alpha1, alpha2, alpha0 : float
        Rate and distortion weights of the Lagrangian.
    distortion : "hamming" or array of shape (A, A)
    schedule : AnnealSchedule, optional
        Defaults to the power law ``2 n t**0.1``.
    n_iter : int, optional
        Annealing iterations; ``None`` means ``50 n``.
    theta : float
        Share of the refinement stream carried by the first description.
    random_state : int, optional
    backend : {"auto", "numba", "python"}

    Attributes
    ----------
    reconstructions_ : ndarray of shape (3, n)
    messages_ : MDMessages
    anneal_report_ : AnnealReport
    rate_report_ : RateReport
    alphabet_size_ : int
    """

    def __init__(self, k=5, k1=1, gamma1=1.0, gamma2=1.0, gamma0=1.0, alpha1=1.0, alpha2=1.0,
                 alpha0=1.0, distortion="hamming", schedule=None, n_iter=None, theta=0.5,
                 random_state=None, backend="auto"):
        self.k = k
        self.k1 = k1
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.gamma0 = gamma0
        self.alpha1 = alpha1
        self.alpha2 = alpha2
        self.alpha0 = alpha0
        self.distortion = distortion
        self.schedule = schedule
        self.n_iter = n_iter
        self.theta = theta
        self.random_state = random_state
        self.backend = backend

    def _weights(self) -> LagrangianWeights:
        return LagrangianWeights(**{name: getattr(self, name) for name in LagrangianWeights.names()})

    def _distortion(self, x) -> DistortionMeasure:
        if isinstance(self.distortion, DistortionMeasure):
            return self.distortion
        if isinstance(self.distortion, str):
            if self.distortion != "hamming":
                raise InvalidInputError(f"unknown distortion {self.distortion!r}")
            return DistortionMeasure.hamming(max(2, int(x.max()) + 1))
        return DistortionMeasure(self.distortion)

    def fit(self, X, y=None):
        x = _as_sequence(X)
        d = self._distortion(x)
        schedule = self.schedule if self.schedule is not None else AnnealSchedule.power_law()
        r = 50 * len(x) if self.n_iter is None else int(self.n_iter)
        self.messages_, self.anneal_report_, self.rate_report_ = md_encode(
            x, self._weights(), d, self.k, self.k1, schedule, r, self.theta, self.random_state,
            backend=self.backend,
        )
        self.reconstructions_ = np.vstack(self.anneal_report_.triple)
        self.alphabet_size_ = d.alphabet_size
        self.n_symbols_ = len(x)
        self._x = x
        return self

    def transform(self, X):
        """Reconstructions ``(y, z, w)`` of ``X``; refits when ``X`` is a new sequence."""
        check_is_fitted(self, "reconstructions_")
        x = _as_sequence(X)
        if not np.array_equal(x, self._x):
            return self.fit(x).reconstructions_.copy()
        return self.reconstructions_.copy()

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).reconstructions_.copy()

    def decode(self, which: int = 0) -> np.ndarray:
        """Run decoder ``which`` (1, 2 or 0 for central) on the stored messages."""
        check_is_fitted(self, "messages_")
        m1, m2 = self.messages_
        if which == 1:
            return md_decode_side(m1, 1)
        if which == 2:
            return md_decode_side(m2, 2)
        if which == 0:
            return md_decode_central(m1, m2)
        raise InvalidInputError(f"decoder index must be 0, 1 or 2, got {which!r}")

    def score(self, X, y=None) -> float:
        """Negative Lagrangian energy of the fitted reconstructions against ``X``."""
        check_is_fitted(self, "reconstructions_")
        x = check_sequence(_as_sequence(X), self.alphabet_size_, name="X")
        if len(x) != self.n_symbols_:
            raise InvalidInputError(f"X has {len(x)} symbols, the coder was fitted on {self.n_symbols_}")
        y_, z_, w_ = self.reconstructions_
        return -compute_energy(x, y_, z_, w_, self._weights(), self._distortion(x), self.k, self.k1).total
