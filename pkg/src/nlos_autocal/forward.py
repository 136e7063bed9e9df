"""Transient forward models and the measurement-consistency loss.

``forward_gaussian`` is the differentiable model the optimizer uses: each
voxel's impulse is relaxed to a Gaussian in path length,

    I[j,m,k] = sum_i rho_i * exp(-(b_k - d_total_i)^2 / sigma_m^2)
                       / (|l_j - o_i|^2 * |s_m - o_i|^2)

with b_k the bin's nominal arrival position (meters) and sigma_m the width
in meters. ``forward_rect_oracle`` is the non-differentiable rectangle-window
accumulation kept around purely as an independent test oracle.

Evaluation parallelizes over scan positions: each (scan, detection) pair owns
a disjoint histogram slice, so chunks write without synchronization and the
result is independent of the chunk layout bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import get_backend, split_chunks
from .errors import ValidationError
from .types import CalibrationState, SceneConfig, TransientSet, Volume

DEFAULT_TRUNCATION_SIGMAS = 5.0
DEGENERACY_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class ForwardWorkspace:
    """Precomputed per-evaluation geometry: static instrument legs, voxel
    centers and bin timing in meter units.

    Built fresh from the current CalibrationState (states are immutable, so
    a workspace can never go stale while in scope)."""

    scan_pos: np.ndarray  # (p, 3)
    det_pos: np.ndarray  # (q, 3)
    src: np.ndarray
    det: np.ndarray
    centers: np.ndarray  # (N, 3)
    rho: np.ndarray  # (N,)
    source_legs: np.ndarray  # (p,)  |i - l_j|
    detector_legs: np.ndarray  # (q,)  |d - s_m|
    base: float
    cdt: float
    nbins: int
    sigma_m: float

    @classmethod
    def build(cls, cal: CalibrationState, volume: Volume, scene: SceneConfig) -> "ForwardWorkspace":
        src = scene.source()
        det = scene.detector()
        scan_pos = cal.scan_positions
        det_pos = cal.detection_positions
        return cls(
            scan_pos=scan_pos,
            det_pos=det_pos,
            src=src,
            det=det,
            centers=volume.centers(),
            rho=np.ascontiguousarray(volume.albedo),
            source_legs=np.linalg.norm(scan_pos - src[None, :], axis=1),
            detector_legs=np.linalg.norm(det_pos - det[None, :], axis=1),
            base=scene.bin_base_meters,
            cdt=scene.bin_spacing_meters,
            nbins=scene.bin_count,
            sigma_m=scene.sigma_meters,
        )


def resolve_subset(cal: CalibrationState, scan_subset) -> np.ndarray:
    if scan_subset is None:
        return np.arange(cal.scan_count, dtype=np.intp)
    idx = np.asarray(scan_subset, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ValidationError("scan_subset must be a non-empty 1-D index list")
    if np.any(idx < 0) or np.any(idx >= cal.scan_count):
        raise ValidationError(f"scan_subset indices out of range [0, {cal.scan_count})")
    return idx


def trunc_bins(scene: SceneConfig, truncation) -> float:
    """Half-window in bins; <= 0 disables truncation."""
    if truncation is None or truncation <= 0:
        return 0.0
    return truncation * scene.sigma_meters / scene.bin_spacing_meters


def run_chunked(worker, n: int, threads: int):
    """Run ``worker(start, stop)`` over a deterministic partition of range(n),
    returning the chunk results in partition order regardless of completion
    order. The fixed order keeps cross-chunk reductions reproducible."""
    chunks = split_chunks(n, threads)
    if len(chunks) == 1:
        return [worker(*chunks[0])]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        futures = [pool.submit(worker, a, b) for a, b in chunks]
        return [f.result() for f in futures]


def forward_gaussian(cal: CalibrationState, volume: Volume, scene: SceneConfig,
                     scan_subset=None, *, truncation=DEFAULT_TRUNCATION_SIGMAS,
                     threads: int = 1, backend=None,
                     eps: float = DEGENERACY_EPS) -> TransientSet:
    """Differentiable Gaussian-relaxed forward model over the selected scans.

    Returns a TransientSet with one row per subset entry, in subset order.
    Output is linear in the albedo. ``truncation`` is the cut radius in
    sigmas (None disables; the tests run untruncated to bound the error).
    """
    idx = resolve_subset(cal, scan_subset)
    ws = ForwardWorkspace.build(cal, volume, scene)
    kern = get_backend(backend)
    scan_pos = np.ascontiguousarray(ws.scan_pos[idx])
    out = np.zeros((idx.size, ws.det_pos.shape[0], ws.nbins))
    tb = trunc_bins(scene, truncation)
    inv_sigma2 = 1.0 / (ws.sigma_m * ws.sigma_m)

    def worker(a, b):
        kern.forward_chunk(scan_pos[a:b], ws.det_pos, ws.src, ws.det,
                           ws.centers, ws.rho, ws.base, ws.cdt, ws.nbins,
                           ws.sigma_m, inv_sigma2, tb, eps, out[a:b])

    run_chunked(worker, idx.size, threads)
    return TransientSet(out)


def forward_rect_oracle(cal: CalibrationState, volume: Volume, scene: SceneConfig,
                        scan_subset=None, *, threads: int = 1, backend=None,
                        eps: float = DEGENERACY_EPS) -> TransientSet:
    """Rectangle-window model (the literal discretized form): voxel i feeds
    bin k iff 0 < k - d_total/(c*bin_width) < 1. Test oracle only; the
    optimizer never calls it."""
    idx = resolve_subset(cal, scan_subset)
    ws = ForwardWorkspace.build(cal, volume, scene)
    kern = get_backend(backend)
    scan_pos = np.ascontiguousarray(ws.scan_pos[idx])
    out = np.zeros((idx.size, ws.det_pos.shape[0], ws.nbins))

    def worker(a, b):
        kern.rect_chunk(scan_pos[a:b], ws.det_pos, ws.src, ws.det, ws.centers,
                        ws.rho, ws.cdt, ws.nbins, eps, out[a:b])

    run_chunked(worker, idx.size, threads)
    return TransientSet(out)


def loss(cal: CalibrationState, volume: Volume, scene: SceneConfig,
         measured: TransientSet, scan_subset=None, *,
         truncation=DEFAULT_TRUNCATION_SIGMAS, threads: int = 1,
         backend=None) -> float:
    """Sum of squared residuals between the Gaussian model and ``measured``
    over the selected scans (all detections, all bins)."""
    measured.check_matches(cal, scene)
    idx = resolve_subset(cal, scan_subset)
    model = forward_gaussian(cal, volume, scene, idx, truncation=truncation,
                             threads=threads, backend=backend)
    res = model.data - measured.data[idx]
    return float(np.sum(res * res))
