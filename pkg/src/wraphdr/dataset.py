"""Supervised training data for external unwrapping networks.

Each source image is scaled by a set of exposure factors, randomly cropped,
and encoded; a record carries the wrapped image, the ground-truth winding
map and the ground-truth wrap edges derived from it.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import as_hwc, check_irradiance
from .codec import CodecParams, SensorImage, encode
from .hdrio import HdrFormatError, read_hdr, write_sensor_png, write_winding_png
from .scenes import SceneSpec, generate_scene
from .solvers import edges_from_winding

__all__ = [
    "AugmentConfig",
    "DatasetRecord",
    "synthesize_dataset",
    "write_dataset",
    "log_histogram",
    "default_threads",
]

log = logging.getLogger(__name__)

THREADS_ENV = "WRAPHDR_THREADS"


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class AugmentConfig:
    exposure_factors: tuple = (1.0, 2.0, 4.0, 8.0)
    crop: tuple = (256, 256)
    crops_per_image: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.exposure_factors or any(f <= 0 for f in self.exposure_factors):
            raise ValueError("exposure factors must be a non-empty list of positive numbers")
        if len(self.crop) != 2 or min(self.crop) < 1:
            raise ValueError(f"crop must be (height, width) >= 1, got {self.crop}")
        if self.crops_per_image < 1:
            raise ValueError("crops_per_image must be >= 1")


@dataclass(eq=False)
class DatasetRecord:
    sensor: SensorImage
    winding: np.ndarray
    edges: object
    source_id: str
    exposure_factor: float
    crop_origin: tuple = (0, 0)
    clean_sensor: np.ndarray = None  # wrapped values before quantization and noise
    index: tuple = field(default=(0, 0, 0))


def _load_source(src, i):
    if isinstance(src, SceneSpec):
        return f"scene:{i}:{src.kind.value}", generate_scene(src)
    if isinstance(src, np.ndarray):
        return f"array:{i}", src
    return os.fspath(src), read_hdr(src)


def _job(img, source_id, i, j, k, factor, params, aug):
    ss = np.random.SeedSequence([aug.seed, i, j, k])
    crop_rng, noise_seed = np.random.default_rng(ss.spawn(1)[0]), int(ss.generate_state(1, np.uint64)[0])
    x, _ = as_hwc(img)
    ch, cw = aug.crop
    h, w = x.shape[:2]
    r0 = int(crop_rng.integers(0, h - ch + 1))
    c0 = int(crop_rng.integers(0, w - cw + 1))
    patch = x[r0:r0 + ch, c0:c0 + cw] * factor
    if np.ndim(img) == 2:
        patch = patch[:, :, 0]
    rec_params = params.replace(seed=noise_seed)
    sensor, winding = encode(patch, rec_params)
    clean = None
    if params.bits or params.noise_sigma:
        clean = encode(patch, rec_params.replace(bits=0, noise_sigma=0.0))[0].data
    return DatasetRecord(sensor=sensor, winding=winding, edges=edges_from_winding(winding),
                         source_id=source_id, exposure_factor=float(factor), crop_origin=(r0, c0),
                         clean_sensor=clean, index=(i, j, k))


def synthesize_dataset(sources, params=None, aug=None, threads=None):
    """Yield one record per (source, exposure factor, crop), in that order.

    ``sources`` holds HDR file paths, :class:`SceneSpec` objects or arrays.
    Unreadable sources and sources smaller than the crop are skipped with a
    logged diagnostic.  The stream is fully determined by ``aug.seed``; the
    thread count only affects speed.
    """
    params = params or CodecParams()
    aug = aug or AugmentConfig()
    threads = threads or default_threads()
    emitted = 0
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for i, src in enumerate(sources):
            try:
                source_id, img = _load_source(src, i)
                img = check_irradiance(img, str(source_id))
            except (OSError, HdrFormatError, ValueError) as exc:
                log.warning("skipping source %r: %s", src, exc)
                continue
            x, _ = as_hwc(img)
            if x.shape[0] < aug.crop[0] or x.shape[1] < aug.crop[1]:
                log.warning("skipping source %s: %dx%d smaller than crop %dx%d",
                            source_id, x.shape[0], x.shape[1], *aug.crop)
                continue
            futures = [pool.submit(_job, img, source_id, i, j, k, f, params, aug)
                       for j, f in enumerate(aug.exposure_factors)
                       for k in range(aug.crops_per_image)]
            for fut in futures:
                emitted += 1
                yield fut.result()
    if emitted == 0:
        raise ValueError("dataset synthesis produced no records")


def write_dataset(records, out_dir):
    """Write records to ``out_dir`` and return the manifest path.

    Per record: ``NNNNNN_sensor.png`` (16-bit codes), ``NNNNNN_winding.png``
    and ``NNNNNN_edges.npz`` (signed edge masks plus the lossless float
    sensor values).  ``manifest.jsonl`` lists one JSON object per record.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.jsonl"
    with open(manifest, "w") as mf:
        for n, rec in enumerate(records):
            stem = f"{n:06d}"
            write_sensor_png(rec.sensor, out / f"{stem}_sensor.png")
            write_winding_png(rec.winding, out / f"{stem}_winding.png")
            arrays = {"horizontal": rec.edges.horizontal, "vertical": rec.edges.vertical,
                      "sensor": rec.sensor.data}
            if rec.clean_sensor is not None:
                arrays["clean_sensor"] = rec.clean_sensor
            with open(out / f"{stem}_edges.npz", "wb") as f:
                np.savez(f, **arrays)
            entry = {
                "id": stem,
                "sensor": f"{stem}_sensor.png",
                "winding": f"{stem}_winding.png",
                "edges": f"{stem}_edges.npz",
                "source": rec.source_id,
                "exposure_factor": rec.exposure_factor,
                "crop_origin": list(rec.crop_origin),
                "shape": list(rec.sensor.shape),
                "params": rec.sensor.params.to_dict(),
            }
            mf.write(json.dumps(entry, sort_keys=True) + "\n")
    return manifest


def log_histogram(img, n_bins=64):
    """Per-channel counts of positive samples in log10-spaced bins.

    Bins span ``[min positive sample, max sample]`` over the whole image.
    Exact zeros are counted separately.

    Returns
    -------
    counts : ndarray, shape (channels, n_bins)
    zeros : ndarray, shape (channels,)
    edges : ndarray, shape (n_bins + 1,)
        log10 bin edges, or ``None`` when the image is all zero.
    """
    if n_bins < 2:
        raise ValueError(f"n_bins must be >= 2, got {n_bins}")
    img = check_irradiance(img)
    x, _ = as_hwc(img)
    c = x.shape[2]
    zeros = np.array([int(np.count_nonzero(x[:, :, i] == 0)) for i in range(c)])
    pos = x[x > 0]
    if pos.size == 0:
        return np.zeros((c, n_bins), dtype=np.int64), zeros, None
    lo, hi = np.log10(pos.min()), np.log10(pos.max())
    if lo == hi:
        # single value: centre it in one bin
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, n_bins + 1)
    counts = np.zeros((c, n_bins), dtype=np.int64)
    for i in range(c):
        v = x[:, :, i]
        counts[i] = np.histogram(np.log10(v[v > 0]), bins=edges)[0]
    return counts, zeros, edges
