"""Reconstruction quality metrics.

PSNR is measured on linear HDR values; SSIM and MS-SSIM are measured after
Reinhard tonemapping ``v / (1 + v)`` so that both images share the [0, 1]
display range.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from ._validation import as_hwc, check_irradiance, check_same_shape

__all__ = [
    "EvalReport",
    "tonemap_reinhard",
    "psnr",
    "ssim",
    "msssim",
    "wrap_count",
    "evaluate",
    "MSSSIM_WEIGHTS",
]

MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
WIN_SIZE = 11
WIN_SIGMA = 1.5
K1, K2 = 0.01, 0.03


@dataclass
class EvalReport:
    psnr_db: float
    ssim: float
    msssim: float = None
    wrap_count: int = None
    per_channel: list = field(default_factory=list)

    def to_dict(self):
        return {
            "psnr_db": _json_float(self.psnr_db),
            "ssim": self.ssim,
            "msssim": self.msssim,
            "wrap_count": self.wrap_count,
            "per_channel": [{k: _json_float(v) for k, v in c.items()} for c in self.per_channel],
        }


def _json_float(x):
    if x is None:
        return None
    return "inf" if x == np.inf else x


def tonemap_reinhard(img):
    """Global Reinhard operator with unit intensity and gamma 1."""
    img = check_irradiance(img)
    return img / (1.0 + img)


def psnr(a, b, peak=None):
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are equal.

    ``peak`` defaults to the maximum of ``a`` (the ground truth).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b)
    if peak is None:
        peak = float(a.max())
    if not peak > 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return np.inf
    return float(10.0 * np.log10(peak**2 / mse))


def gaussian_window(size=WIN_SIZE, sigma=WIN_SIGMA):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def _filt(x, win):
    return convolve2d(x, win[::-1, ::-1], mode="valid")


def _ssim_maps(x, y, win, data_range=1.0):
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    mx, my = _filt(x, win), _filt(y, win)
    sxx = _filt(x * x, win) - mx * mx
    syy = _filt(y * y, win) - my * my
    sxy = _filt(x * y, win) - mx * my
    lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
    cs = (2 * sxy + c2) / (sxx + syy + c2)
    return lum, cs


def _display_pair(a, b, tonemap):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b)
    if tonemap:
        a, b = tonemap_reinhard(a), tonemap_reinhard(b)
    a, _ = as_hwc(a)
    b, _ = as_hwc(b)
    return a, b


def ssim(a, b, tonemap=True, per_channel=False):
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), unit data range.

    Images are tonemapped first unless ``tonemap=False``.  Channels are
    scored separately and averaged.
    """
    a, b = _display_pair(a, b, tonemap)
    if min(a.shape[:2]) < WIN_SIZE:
        raise ValueError(f"SSIM needs images of at least {WIN_SIZE}x{WIN_SIZE}, got {a.shape[:2]}")
    win = gaussian_window()
    vals = []
    for ch in range(a.shape[2]):
        lum, cs = _ssim_maps(a[:, :, ch], b[:, :, ch], win)
        vals.append(float(np.mean(lum * cs)))
    return vals if per_channel else float(np.mean(vals))


def _downsample(x):
    # 2x2 box average, odd trailing row/column dropped
    h, w = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
    x = x[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def msssim(a, b, tonemap=True, weights=MSSSIM_WEIGHTS, per_channel=False):
    """Multi-scale SSIM over ``len(weights)`` dyadic scales.

    Contrast-structure terms are taken at every scale and luminance only at
    the coarsest; negative terms are clipped to 0 before exponentiation.
    """
    a, b = _display_pair(a, b, tonemap)
    levels = len(weights)
    need = WIN_SIZE * 2 ** (levels - 1)
    if min(a.shape[:2]) < need:
        raise ValueError(f"{levels}-scale MS-SSIM needs images of at least {need}x{need}, got {a.shape[:2]}")
    win = gaussian_window()
    vals = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        score = 1.0
        for i, wgt in enumerate(weights):
            lum, cs = _ssim_maps(x, y, win)
            term = np.mean(lum * cs) if i == levels - 1 else np.mean(cs)
            score *= max(float(term), 0.0) ** wgt
            if i < levels - 1:
                x, y = _downsample(x), _downsample(y)
        vals.append(score)
    return vals if per_channel else float(np.mean(vals))


def wrap_count(winding):
    """Number of 4-neighbour boundaries across which the winding changes."""
    w, _ = as_hwc(np.asarray(winding))
    return int(np.count_nonzero(np.diff(w, axis=1)) + np.count_nonzero(np.diff(w, axis=0)))


def evaluate(pred, gt, peak=None, winding=None):
    """PSNR, SSIM and (when the image is large enough) MS-SSIM of ``pred``."""
    gt = check_irradiance(gt, "gt")
    pred = check_irradiance(pred, "pred")
    check_same_shape(gt, pred, ("gt", "pred"))
    peak = float(gt.max()) if peak is None else peak
    if not peak > 0:
        peak = 1.0
    g, _ = as_hwc(gt)
    p, _ = as_hwc(pred)
    big_ms = min(g.shape[:2]) >= WIN_SIZE * 2 ** (len(MSSSIM_WEIGHTS) - 1)
    big = min(g.shape[:2]) >= WIN_SIZE
    per = []
    for ch in range(g.shape[2]):
        per.append({
            "psnr_db": psnr(g[:, :, ch], p[:, :, ch], peak),
            "ssim": ssim(g[:, :, ch], p[:, :, ch]) if big else None,
            "msssim": msssim(g[:, :, ch], p[:, :, ch]) if big_ms else None,
        })
    return EvalReport(
        psnr_db=psnr(gt, pred, peak),
        ssim=ssim(gt, pred) if big else None,
        msssim=msssim(gt, pred) if big_ms else None,
        wrap_count=None if winding is None else wrap_count(winding),
        per_channel=per,
    )
