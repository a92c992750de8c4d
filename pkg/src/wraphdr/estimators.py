"""scikit-learn style wrappers around the codec and the unwrapping solvers.

Both estimators are stateless apart from validated parameters, so ``fit``
only checks hyper-parameters; they exist so the codec can sit in a
:class:`sklearn.pipeline.Pipeline` and be tuned with ``set_params``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_irradiance
from .codec import CodecParams, SensorImage, encode, reconstruct
from .metrics import psnr
from .solvers import MrfConfig, Solver, decode, detect_wrap_edges, unwrap_floodfill, unwrap_mrf


class WrapEncoder(TransformerMixin, BaseEstimator):
    """Simulate a wrapping sensor.

    ``transform`` maps irradiance to wrapped sensor values;
    ``inverse_transform`` needs the winding map as well.

    >>> enc = WrapEncoder(kind="modulo").fit(None)
    >>> enc.transform(np.array([0.5, 2.25])).tolist()
    [0.5, 0.25]
    """

    def __init__(self, kind="mantissa", alpha=2.0, i_max=1.0, bits=0, noise_sigma=0.0, seed=0):
        self.kind = kind
        self.alpha = alpha
        self.i_max = i_max
        self.bits = bits
        self.noise_sigma = noise_sigma
        self.seed = seed

    def fit(self, X=None, y=None):
        self.params_ = CodecParams(kind=self.kind, alpha=self.alpha, i_max=self.i_max, bits=self.bits,
                                   noise_sigma=self.noise_sigma, seed=self.seed)
        if X is not None:
            check_irradiance(X, "X")
        return self

    def encode(self, X):
        """Return ``(SensorImage, winding)``."""
        check_is_fitted(self, "params_")
        return encode(X, self.params_)

    def transform(self, X):
        return np.asarray(self.encode(X)[0].data)

    def inverse_transform(self, X, winding):
        check_is_fitted(self, "params_")
        data = X.data if isinstance(X, SensorImage) else X
        return reconstruct(np.asarray(data, dtype=np.float64), winding, self.params_)


class WindingDecoder(BaseEstimator):
    """Recover winding numbers and irradiance from wrapped sensor values.

    ``predict`` returns the winding map, ``transform`` the reconstructed
    irradiance and ``score`` the PSNR against a ground-truth image.
    """

    def __init__(self, kind="mantissa", alpha=2.0, i_max=1.0, solver="floodfill", tau=None,
                 max_label=16, lam=1.0, trunc=None, max_sweeps=5):
        self.kind = kind
        self.alpha = alpha
        self.i_max = i_max
        self.solver = solver
        self.tau = tau
        self.max_label = max_label
        self.lam = lam
        self.trunc = trunc
        self.max_sweeps = max_sweeps

    def fit(self, X=None, y=None):
        self.params_ = CodecParams(kind=self.kind, alpha=self.alpha, i_max=self.i_max)
        self.solver_ = Solver(self.solver)
        trunc = 2.0 * self.i_max if self.trunc is None else self.trunc
        self.config_ = MrfConfig(max_label=self.max_label, lam=self.lam, trunc=trunc,
                                 max_sweeps=self.max_sweeps)
        return self

    def _sensor(self, X):
        check_is_fitted(self, "params_")
        if isinstance(X, SensorImage):
            return X
        data = np.asarray(X, dtype=np.float64)
        if np.any(data < 0) or np.any(data >= self.params_.i_max):
            raise ValueError(f"sensor values must lie in [0, {self.params_.i_max})")
        return SensorImage(data, self.params_)

    def predict(self, X):
        sensor = self._sensor(X)
        if self.solver_ is Solver.FLOODFILL:
            w, self.report_ = unwrap_floodfill(sensor, detect_wrap_edges(sensor, self.tau), return_report=True)
            return w
        w, self.report_ = unwrap_mrf(sensor, self.config_, return_report=True)
        return w

    def transform(self, X):
        sensor = self._sensor(X)
        img, _, self.report_ = decode(sensor, self.solver_, self.config_, self.tau, return_report=True)
        return img

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)

    def score(self, X, y):
        """PSNR (dB) of the reconstruction against ground-truth irradiance ``y``."""
        return psnr(y, self.transform(X))
