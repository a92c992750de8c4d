"""Analytic test scenes: ramps and Gaussian blobs."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class SceneKind(str, Enum):
    RAMP1D = "ramp1d"
    RAMP2D = "ramp2d"
    GAUSSIAN = "gaussian"
    GAUSSIAN_MIXTURE = "gaussian_mixture"
    FROM_FILE = "from_file"


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of an analytic scene.

    ``size`` is ``(height, width)``; ``Ramp1D`` uses ``n`` samples from 0 to
    ``amplitude``.  ``Ramp2D`` rises by ``slope`` per pixel along x and
    ``slope_y`` along y on top of ``offset``.  ``GaussianMixture`` reads
    ``components`` as ``(amplitude, cy, cx, sigma)`` tuples.
    """

    kind: SceneKind = SceneKind.GAUSSIAN
    amplitude: float = 16.0
    size: tuple = (128, 128)
    center: tuple = None
    sigma: float = 24.0
    n: int = 6
    slope: float = 0.4
    slope_y: float = 0.0
    offset: float = 0.0
    components: tuple = ()
    path: str = None
    channels: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", SceneKind(self.kind))
        if self.kind in (SceneKind.RAMP1D, SceneKind.GAUSSIAN) and not self.amplitude > 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")
        if self.kind is SceneKind.GAUSSIAN and not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        for comp in self.components:
            if comp[0] <= 0 or comp[3] <= 0:
                raise ValueError(f"mixture component needs amplitude, sigma > 0: {comp}")
        if self.kind is SceneKind.FROM_FILE and not self.path:
            raise ValueError("FromFile scene needs a path")


def _gaussian(h, w, amp, cy, cx, sigma):
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    return amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * sigma**2))


def generate_scene(spec):
    """Evaluate ``spec`` on its pixel grid.

    Returns a 1D array for ``Ramp1D`` and an (H, W) array otherwise (or
    (H, W, 3) when ``channels == 3``; channels are identical copies).
    """
    h, w = spec.size
    if spec.kind is SceneKind.RAMP1D:
        return np.linspace(0.0, spec.amplitude, spec.n)
    if spec.kind is SceneKind.RAMP2D:
        y, x = np.mgrid[0:h, 0:w].astype(np.float64)
        img = spec.offset + spec.slope * x + spec.slope_y * y
    elif spec.kind is SceneKind.GAUSSIAN:
        cy, cx = spec.center if spec.center is not None else (h // 2, w // 2)
        img = _gaussian(h, w, spec.amplitude, cy, cx, spec.sigma)
    elif spec.kind is SceneKind.GAUSSIAN_MIXTURE:
        img = np.full((h, w), float(spec.offset))
        for amp, cy, cx, sigma in spec.components:
            img += _gaussian(h, w, amp, cy, cx, sigma)
    else:
        from .hdrio import read_hdr

        return read_hdr(spec.path)
    if spec.channels == 3:
        img = np.repeat(img[:, :, None], 3, axis=2)
    return img


def random_smooth_scene(rng, size=(64, 64), max_step=0.4, peak=(4.0, 32.0), n_blobs=(1, 4)):
    """Random piecewise-smooth irradiance: Gaussian blobs on a tilted floor.

    The scene is rescaled so the largest modulo-domain step between
    4-neighbours is ``max_step`` or less, and always contains pixels below
    1 (a dark background).
    """
    h, w = size
    comps = []
    for _ in range(int(rng.integers(n_blobs[0], n_blobs[1] + 1))):
        comps.append((rng.uniform(*peak), rng.uniform(0, h - 1), rng.uniform(0, w - 1),
                      rng.uniform(0.12, 0.3) * min(h, w)))
    spec = SceneSpec(kind=SceneKind.GAUSSIAN_MIXTURE, size=size, components=tuple(comps), offset=0.0)
    img = generate_scene(spec)
    y, x = np.mgrid[0:h, 0:w]
    img = img + rng.uniform(0, 0.005) * x + rng.uniform(0, 0.005) * y
    step = max(np.abs(np.diff(img, axis=0)).max(), np.abs(np.diff(img, axis=1)).max())
    if step > max_step:
        img = img * (max_step / step)
    return img
