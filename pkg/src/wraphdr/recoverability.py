"""Pairwise recoverability conditions, a sequential 1D unwrapper and
dynamic-range estimates for the modulo and mantissa encodings."""

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_hwc, check_irradiance
from .codec import Encoding, reconstruct, to_domain

__all__ = [
    "RecoverabilityReport",
    "DynamicRangeEstimate",
    "pair_step",
    "pair_recoverable",
    "check_recoverable",
    "unwrap_sequential_1d",
    "max_dynamic_range",
]


@dataclass
class RecoverabilityReport:
    total_pairs: int
    violations: list = field(default_factory=list)

    @property
    def satisfied(self):
        return not self.violations

    @property
    def n_violations(self):
        return len(self.violations)


@dataclass(frozen=True)
class DynamicRangeEstimate:
    kind: Encoding
    n_pixels: int
    i_max: float
    dr_db: float


def pair_step(a, b, params):
    """In-domain step ``|u(b) - u(a)|`` between two irradiance samples.

    For the mantissa encoding this is the log-domain step when both samples
    are at or above ``i_max`` and the linear step when both are below.
    """
    return np.abs(to_domain(b, params) - to_domain(a, params))


def pair_recoverable(a, b, params):
    """True where a single wrap at most separates samples ``a`` and ``b``."""
    return pair_step(a, b, params) <= params.i_max


def check_recoverable(img, params):
    """Check every 4-neighbour pair of ``img`` against the wrap bound.

    Violations are reported as ``((pixel_a, pixel_b), step, bound)`` with
    pixels given as (row, col, channel) indices into the (H, W, C) view.
    """
    img = check_irradiance(img)
    x, _ = as_hwc(img)
    u = to_domain(x, params)
    total = 0
    violations = []
    for axis, (dr, dc) in ((1, (0, 1)), (0, (1, 0))):
        d = np.abs(np.diff(u, axis=axis))
        total += d.size
        for r, c, ch in np.argwhere(d > params.i_max):
            a = (int(r), int(c), int(ch))
            b = (int(r) + dr, int(c) + dc, int(ch))
            violations.append(((a, b), float(d[r, c, ch]), params.i_max))
    violations.sort()
    return RecoverabilityReport(total_pairs=total, violations=violations)


def unwrap_sequential_1d(wrapped, params, first_winding=0):
    """Greedy nearest-continuation unwrapping of one wrapped sequence.

    Each step picks the wrap ``k`` in {-1, 0, +1} that makes the in-domain
    increment smallest.  The result is exact whenever every true in-domain
    step is below ``i_max / 2``.

    Returns
    -------
    unwrapped : ndarray
        Irradiance estimate.
    winding : ndarray of int64
    ties : ndarray of bool
        Steps whose increment was exactly ``i_max / 2``; ``k = 0`` is used.
    """
    m = np.asarray(wrapped, dtype=np.float64).ravel()
    i_max = params.i_max
    n = m.size
    winding = np.zeros(n, dtype=np.int64)
    ties = np.zeros(n, dtype=bool)
    if n == 0:
        return m.copy(), winding, ties
    winding[0] = first_winding
    d = np.diff(m)
    half = i_max / 2
    k = np.where(d < -half, 1, np.where(d > half, -1, 0))
    ties[1:] = np.abs(d) == half
    winding[1:] = first_winding + np.cumsum(k)
    if np.any(winding < 0):
        raise ValueError("sequence unwraps below zero winding; check first_winding")
    return reconstruct(m, winding, params), winding, ties


def max_dynamic_range(kind, n_pixels, i_max=1.0):
    """Largest dynamic range recoverable by a ramp across ``n_pixels`` pixels.

    Modulo: ``10 log10(N * i_max)``.  Mantissa: ``10 N log10(i_max)``, which
    is degenerate for ``i_max <= 1`` and rejected there.
    """
    kind = Encoding(kind)
    n_pixels = int(n_pixels)
    if n_pixels < 2:
        raise ValueError(f"n_pixels must be >= 2, got {n_pixels}")
    if i_max <= 0:
        raise ValueError(f"i_max must be > 0, got {i_max}")
    if kind is Encoding.MODULO:
        dr = 10.0 * np.log10(n_pixels * i_max)
    else:
        if i_max <= 1:
            raise ValueError(
                f"mantissa dynamic range formula 10*N*log10(i_max) is degenerate "
                f"for i_max <= 1 (got {i_max}); it would give {10 * n_pixels * np.log10(i_max):.3g} dB"
            )
        dr = 10.0 * n_pixels * np.log10(i_max)
    return DynamicRangeEstimate(kind=kind, n_pixels=n_pixels, i_max=float(i_max), dr_db=float(dr))
