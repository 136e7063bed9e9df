"""Initial albedo estimates: time-gated backprojection with optional
band-pass filtering (the stand-in for a full phasor-field initializer).

Backprojection smears each measured sample over the ellipsoidal shell of
voxels consistent with its path length, weighting by r_l^2 * r_s^2 to undo
the model's falloff. That is deliberately crude: it only has to be good
enough for gradient descent to refine.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ._kernels import get_backend
from .errors import ValidationError
from .forward import (DEGENERACY_EPS, ForwardWorkspace, forward_gaussian,
                      run_chunked)
from .types import CalibrationState, SceneConfig, TransientSet, Volume


def backproject(cal: CalibrationState, scene: SceneConfig,
                measured: TransientSet, volume_template: Volume, *,
                threads: int = 1, backend=None,
                eps: float = DEGENERACY_EPS) -> Volume:
    """rho(o_i) = sum_{j,m} m[j][m][k(i,j,m)] * r_l^2 * r_s^2, gathering the
    bin whose nominal arrival time is nearest to each voxel's path length.
    Out-of-range bins contribute nothing."""
    measured.check_matches(cal, scene)
    ws = ForwardWorkspace.build(cal, volume_template, scene)
    kern = get_backend(backend)
    meas = measured.data

    def worker(a, b):
        acc = np.zeros(ws.centers.shape[0])
        kern.backproject_chunk(ws.scan_pos[a:b], ws.det_pos, ws.src, ws.det,
                               ws.centers, meas[a:b], ws.base, ws.cdt,
                               ws.nbins, eps, acc)
        return acc

    parts = run_chunked(worker, cal.scan_count, threads)
    rho = np.zeros(ws.centers.shape[0])
    for p in parts:
        rho += p
    return volume_template.with_albedo(rho)


def bandpass_kernel(scene: SceneConfig, center_wavelength: float,
                    cycles: float = 3.0) -> np.ndarray:
    """Zero-mean Gaussian-windowed cosine (Morlet-style) along the bin axis.

    ``center_wavelength`` is in meters of path length; its period in bins is
    wavelength / (c * bin_width). The envelope FWHM spans ``cycles`` periods.
    """
    if center_wavelength <= 0:
        raise ValidationError("center_wavelength must be > 0")
    if cycles <= 0:
        raise ValidationError("cycles must be > 0")
    period_bins = center_wavelength / scene.bin_spacing_meters
    if period_bins < 2.0:
        raise ValidationError(
            f"wavelength {center_wavelength} m spans {period_bins:.2f} bins; "
            "need at least 2 bins per period to be resolvable")
    s = cycles * period_bins / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    half = int(np.ceil(3.0 * s))
    n = np.arange(-half, half + 1, dtype=np.float64)
    kernel = np.exp(-(n * n) / (2.0 * s * s)) * np.cos(2.0 * np.pi * n / period_bins)
    kernel -= kernel.mean()  # exact zero response to constant histograms
    return kernel


def bandpass_filter(measured: TransientSet, center_wavelength: float,
                    cycles: float = 3.0, *, scene: SceneConfig) -> TransientSet:
    """Convolve every histogram with the band-pass kernel (nearest-edge
    padding keeps constants mapping to exactly zero)."""
    kernel = bandpass_kernel(scene, center_wavelength, cycles)
    out = ndimage.convolve1d(measured.data, kernel, axis=2, mode="nearest")
    return TransientSet(out)


def scale_to_measurements(cal: CalibrationState, volume: Volume,
                          scene: SceneConfig, measured: TransientSet, *,
                          threads: int = 1, backend=None) -> Volume:
    """Rescale an initial albedo by the least-squares amplitude fit
    alpha = <F v, m> / <F v, F v>. Backprojection output is off from the
    measurement scale by orders of magnitude; one global scale puts the
    first residuals in range of the optimizer's step sizes."""
    model = forward_gaussian(cal, volume, scene, threads=threads,
                             backend=backend).data
    denom = float(np.sum(model * model))
    if denom == 0.0:
        return volume
    alpha = float(np.sum(model * measured.data)) / denom
    return volume.with_albedo(volume.albedo * max(alpha, 0.0))


def initial_volume(cal: CalibrationState, scene: SceneConfig,
                   measured: TransientSet, volume_template: Volume, *,
                   wavelength: float | None = None, cycles: float = 3.0,
                   threads: int = 1, backend=None) -> Volume:
    """Backprojection pipeline used by the CLI and analysis sweeps:
    optional band-pass -> backproject -> envelope/clamp -> amplitude fit.
    ``wavelength=None`` skips the filter; negatives are clamped to zero
    before the albedo is used as a starting point."""
    data = measured
    if wavelength is not None:
        data = bandpass_filter(measured, wavelength, cycles, scene=scene)
    vol = backproject(cal, scene, data, volume_template, threads=threads,
                      backend=backend)
    rho = np.abs(vol.albedo) if wavelength is not None else np.maximum(vol.albedo, 0.0)
    vol = vol.with_albedo(rho)
    return scale_to_measurements(cal, vol, scene, measured, threads=threads,
                                 backend=backend)
