"""Forward in-pixel encodings (modulo and mantissa) and their inverse.

Every function here is pointwise, so arrays of any shape are accepted.  A
sample is described by the pair ``(m, W)``: the wrapped sensor value
``m`` in ``[0, i_max)`` and the winding number ``W``.  Both encodings share
a continuous "in-domain" coordinate ``u = m + W * i_max``:

* modulo:   ``u = I``
* mantissa: ``u = I`` below ``i_max`` and ``u = log_alpha(I) + i_max`` above,

so that ``m = u mod i_max`` and ``W = floor(u / i_max)`` for both.  The
unwrapping solvers work exclusively on ``u``.
"""

from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np

from ._validation import check_irradiance, check_same_shape

__all__ = [
    "Encoding",
    "CodecParams",
    "SensorImage",
    "encode",
    "reconstruct",
    "quantize",
    "quantization_error_bounds",
    "to_domain",
    "from_domain",
]


class Encoding(str, Enum):
    MODULO = "modulo"
    MANTISSA = "mantissa"


@dataclass(frozen=True)
class CodecParams:
    """Everything the image formation model needs.

    ``bits = 0`` disables the quantizer; ``noise_sigma`` is the standard
    deviation of the additive read noise in sensor units.
    """

    kind: Encoding = Encoding.MANTISSA
    alpha: float = 2.0
    i_max: float = 1.0
    bits: int = 0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Encoding(self.kind))
        if not np.isfinite(self.i_max) or self.i_max <= 0:
            raise ValueError(f"i_max must be > 0, got {self.i_max}")
        if not np.isfinite(self.alpha) or self.alpha <= 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")
        if self.kind is Encoding.MANTISSA and self.i_max < 1:
            # log_alpha(I) would be negative on [i_max, 1) and collide with
            # the identity branch's W = 0.
            raise ValueError(f"mantissa encoding needs i_max >= 1, got {self.i_max}")
        if int(self.bits) != self.bits or not 0 <= self.bits <= 16:
            raise ValueError(f"bits must be an integer in 0..16, got {self.bits}")
        object.__setattr__(self, "bits", int(self.bits))
        if not np.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def top(self):
        """Largest representable sensor value, one ulp below ``i_max``."""
        return np.nextafter(self.i_max, 0.0)

    def to_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d):
        fields = ("kind", "alpha", "i_max", "bits", "noise_sigma", "seed")
        return cls(**{k: d[k] for k in fields if k in d})

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class SensorImage:
    """Wrapped sensor observation together with the parameters that made it."""

    data: np.ndarray
    params: CodecParams

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape


def _exact_log2_split(img, i_max):
    # alpha = 2 and integer i_max: split I = f * 2**e so the integer part of
    # log2(I) is exact and only the fractional part carries rounding error.
    k = int(i_max)
    frac, expo = np.frexp(img)
    n = expo.astype(np.int64) - 1  # floor(log2 I)
    l = np.log2(2.0 * frac)  # in [0, 1)
    l = np.where(l >= 1.0, np.nextafter(1.0, 0.0), l)
    q = np.floor_divide(n, k)
    m = (n - q * k) + l
    return m, q + 1


def _exact_exp2_join(m, w, i_max):
    k = int(i_max)
    j = np.floor(m)
    return np.ldexp(np.exp2(m - j), (j + (w - 1) * k).astype(np.int64))


def _use_exact_path(params):
    return params.alpha == 2.0 and float(params.i_max).is_integer()


def _wrap(img, params):
    """Noiseless, unquantized (m, W) for validated irradiance ``img``."""
    i_max = params.i_max
    if params.kind is Encoding.MODULO:
        w = np.floor(img / i_max)
        m = img - w * i_max
        # guard against m landing on i_max through rounding
        over = m >= i_max
        m = np.where(over, m - i_max, m)
        w = np.where(over, w + 1, w)
        return np.clip(m, 0.0, None), w.astype(np.int64)

    above = img >= i_max
    safe = np.where(above, img, i_max)
    if _use_exact_path(params):
        m_log, w_log = _exact_log2_split(safe, i_max)
    else:
        log = np.log(safe) / np.log(params.alpha)
        q = np.floor(log / i_max)
        m_log = log - q * i_max
        over = m_log >= i_max
        m_log = np.where(over, m_log - i_max, m_log)
        q = np.where(over, q + 1, q)
        m_log = np.clip(m_log, 0.0, None)
        w_log = q.astype(np.int64) + 1
    m = np.where(above, m_log, img)
    w = np.where(above, w_log, 0)
    return m, w.astype(np.int64)


def quantize(value, i_max=1.0, bits=8):
    """Uniform mid-tread quantizer with ``2**bits`` levels over ``[0, i_max]``.

    The top code equals ``i_max``.  Works on scalars and arrays.
    """
    if not 1 <= int(bits) <= 16:
        raise ValueError(f"bits must be in 1..16, got {bits}")
    v = np.asarray(value, dtype=np.float64)
    if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > i_max):
        raise ValueError(f"value outside [0, {i_max}]: {value!r}")
    levels = 2 ** int(bits) - 1
    out = np.rint(v * levels / i_max) * i_max / levels
    return float(out) if out.ndim == 0 else out


def encode(img, params=None):
    """Encode irradiance into a wrapped sensor image and its winding map.

    Parameters
    ----------
    img : array_like
        Nonnegative, finite irradiance of any shape.
    params : CodecParams, optional
        Defaults to the mantissa encoding with ``alpha=2, i_max=1``.

    Returns
    -------
    sensor : SensorImage
        Quantized (if ``bits > 0``) and noisy (if ``noise_sigma > 0``)
        wrapped values, always in ``[0, i_max)``.
    winding : ndarray of int64
        Ground-truth winding numbers of the noiseless, unquantized signal.
    """
    params = params or CodecParams()
    img = check_irradiance(img)
    m, w = _wrap(img, params)
    if params.bits:
        m = quantize(m, params.i_max, params.bits)
    if params.noise_sigma > 0:
        rng = np.random.default_rng(params.seed)
        m = m + rng.normal(0.0, params.noise_sigma, size=m.shape)
    # the top quantizer code and noise can both reach i_max
    m = np.clip(m, 0.0, params.top)
    return SensorImage(m, params), w


def reconstruct(sensor, winding, params=None):
    """Invert the encoding given the wrapped values and winding numbers.

    ``sensor`` may be a :class:`SensorImage` or a raw array, in which case
    ``params`` must be given.
    """
    if isinstance(sensor, SensorImage):
        params = params or sensor.params
        m = sensor.data
    else:
        if params is None:
            raise ValueError("params are required when sensor is a plain array")
        m = np.asarray(sensor, dtype=np.float64)
    w = np.asarray(winding)
    check_same_shape(m, w, ("sensor", "winding"))
    if np.any(w < 0):
        raise ValueError("winding numbers must be >= 0")
    w = w.astype(np.int64)
    if params.kind is Encoding.MODULO:
        return m + w * params.i_max
    wrapped = w > 0
    if _use_exact_path(params):
        up = _exact_exp2_join(m, np.where(wrapped, w, 1), params.i_max)
    else:
        expo = m + (np.where(wrapped, w, 1) - 1) * params.i_max
        up = np.exp(expo * np.log(params.alpha))
    return np.where(wrapped, up, m)


def to_domain(img, params):
    """Continuous in-domain coordinate ``u`` of irradiance ``img``."""
    img = np.asarray(img, dtype=np.float64)
    if params.kind is Encoding.MODULO:
        return img
    above = img >= params.i_max
    safe = np.where(above, img, params.i_max)
    log = np.log(safe) / np.log(params.alpha)
    return np.where(above, log + params.i_max, img)


def from_domain(u, params):
    """Inverse of :func:`to_domain`."""
    u = np.asarray(u, dtype=np.float64)
    if params.kind is Encoding.MODULO:
        return u
    above = u >= params.i_max
    return np.where(above, np.power(params.alpha, np.where(above, u, 0.0) - params.i_max), u)


def quantization_error_bounds(params, winding):
    """Quantizer step and worst-case relative error in winding window ``winding``.

    Returns ``(absolute_step, max_relative_error)`` in irradiance units.  For
    the modulo encoding the step is fixed and the relative error shrinks as
    ``1 / W``; for the mantissa encoding the relative error is fixed at
    ``alpha**s - 1`` (``s`` the in-log step) and the absolute step, reported
    at the middle of the window, grows geometrically.
    """
    if params.bits == 0:
        raise ValueError("quantizer disabled (bits = 0): no quantization error")
    winding = int(winding)
    if winding < 0:
        raise ValueError(f"winding must be >= 0, got {winding}")
    step = params.i_max / (2**params.bits - 1)
    if params.kind is Encoding.MODULO:
        rel = step / (winding * params.i_max) if winding else np.inf
        return step, rel
    if winding == 0:
        # identity branch below saturation behaves like a linear sensor
        return step, np.inf
    rel = params.alpha**step - 1.0
    mid = params.alpha ** ((winding - 1) * params.i_max + params.i_max / 2)
    return mid * rel, rel
