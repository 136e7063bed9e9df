"""Metrics and diagnostic sweeps: RMSE, basin-of-attraction profiles,
recoverability heatmaps, calibration-noise sensitivity and spatial-pattern
recovery. Sweeps emit plain CSV; plotting is left to the caller.
"""

from __future__ import annotations

import csv
from dataclasses import replace

import numpy as np

from .backprojection import initial_volume
from .errors import DimensionMismatchError, ValidationError
from .forward import DEFAULT_TRUNCATION_SIGMAS
from .gradients import grad_loss
from .optim import AutocalSchedule, autocal, reconstruct_only
from .simulate import (PerturbationSpec, ScanGrid, perturb,
                       radial_directions, scenario, synthesize)
from .types import CalibrationState, SceneConfig, TransientSet, Volume


def scan_rmse(cal_est: CalibrationState, cal_true: CalibrationState,
              axes=(True, True, True)) -> float:
    """Root mean square scan-position error restricted to the masked axes."""
    if cal_est.scan_count != cal_true.scan_count:
        raise DimensionMismatchError(
            f"scan counts differ: {cal_est.scan_count} vs {cal_true.scan_count}")
    delta = cal_est.scan_positions - cal_true.scan_positions
    mask = np.array([bool(a) for a in axes], dtype=np.float64)
    return float(np.sqrt(np.mean(np.sum((delta * mask[None, :]) ** 2, axis=1))))


def directional_rmse(cal_est: CalibrationState, cal_true: CalibrationState,
                     directions: np.ndarray) -> float:
    """RMSE of scan errors projected on per-scan unit directions."""
    delta = cal_est.scan_positions - cal_true.scan_positions
    proj = np.einsum("ij,ij->i", delta, directions)
    return float(np.sqrt(np.mean(proj ** 2)))


def volume_correlation(a: Volume, b: Volume) -> float:
    """Normalized cross-correlation (cosine similarity) of two albedo
    volumes; 1.0 means identical up to scale."""
    x = a.albedo
    y = b.albedo
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(np.dot(x, y) / (nx * ny))


def boundary_energy(volume: Volume) -> float:
    """|albedo| mass on the outermost voxel shell over the total; flags the
    boundary-inflation failure mode of model mismatch."""
    grid = np.abs(volume.grid())
    total = float(grid.sum())
    if total == 0.0:
        return 0.0
    nx, ny, nz = volume.dims
    interior = grid[1:nx - 1, 1:ny - 1, 1:nz - 1] if min(nx, ny, nz) > 2 else np.zeros(0)
    return float((total - interior.sum()) / total)


def _projected_gradient(scene, cal, volume_true, measured, scan_index,
                        direction, delta, *, threads, backend):
    moved = cal.scan_positions.copy()
    moved[scan_index] += delta * direction
    shifted = replace(cal, scan_positions=moved, update_mask=(True, True, True))
    bundle = grad_loss(shifted, volume_true, scene, measured,
                       threads=threads, backend=backend)
    return float(np.dot(bundle.d_scan[scan_index], direction))


def recoverability_profile(scene: SceneConfig, cal_true: CalibrationState,
                           volume_true: Volume, scan_index: int, deltas, *,
                           measured: TransientSet | None = None,
                           threads: int = 1, backend=None):
    """Loss gradient projected on the transmitter-scan direction for a
    single scan displaced radially by each delta, all else at truth.

    Restoring behaviour means sign(projection) == sign(delta): descent on
    the loss pushes the scan point back toward the truth.
    """
    if measured is None:
        measured = synthesize(cal_true, volume_true, scene, threads=threads,
                              backend=backend)
    direction = radial_directions(cal_true, scene)[scan_index]
    out = []
    for delta in deltas:
        g = _projected_gradient(scene, cal_true, volume_true, measured,
                                scan_index, direction, float(delta),
                                threads=threads, backend=backend)
        out.append((float(delta), g))
    return out


def _range_is_restoring(scene, cal_true, volume_true, measured, scan_index,
                        direction, delta, threads, backend):
    if delta == 0.0:
        return True
    for signed in (delta, -delta):
        g = _projected_gradient(scene, cal_true, volume_true, measured,
                                scan_index, direction, signed,
                                threads=threads, backend=backend)
        if np.sign(g) != np.sign(signed):
            return False
    return True


def recoverability_heatmap(scene: SceneConfig, cal_true: CalibrationState,
                           volume_true: Volume, delta_grid, *,
                           resolution: float = 0.002,
                           measured: TransientSet | None = None,
                           threads: int = 1, backend=None) -> np.ndarray:
    """Per-scan recovery range: the largest |delta| on (and refined between)
    the grid points that still has restoring sign in both directions.

    Scans the sorted grid outward, then bisects between the last restoring
    and first non-restoring magnitude down to ``resolution`` meters.
    """
    mags = np.unique(np.abs(np.asarray(delta_grid, dtype=np.float64)))
    mags = mags[mags > 0]
    if measured is None:
        measured = synthesize(cal_true, volume_true, scene, threads=threads,
                              backend=backend)
    dirs = radial_directions(cal_true, scene)
    ranges = np.zeros(cal_true.scan_count)
    for j in range(cal_true.scan_count):
        good = 0.0
        bad = None
        for mag in mags:
            if _range_is_restoring(scene, cal_true, volume_true, measured, j,
                                   dirs[j], float(mag), threads, backend):
                good = float(mag)
            else:
                bad = float(mag)
                break
        while bad is not None and bad - good > resolution:
            mid = 0.5 * (good + bad)
            if _range_is_restoring(scene, cal_true, volume_true, measured, j,
                                   dirs[j], mid, threads, backend):
                good = mid
            else:
                bad = mid
        ranges[j] = good
    return ranges


def noise_sensitivity_sweep(scene: SceneConfig, grid: ScanGrid,
                            volume_true: Volume, stds, reconstructor: str = "reconstruct_only",
                            *, seed: int = 0, schedule: AutocalSchedule | None = None,
                            threads: int = 1, backend=None):
    """Reconstruction quality vs calibration-noise level (scenario 1).

    ``reconstructor`` is ``reconstruct_only`` (no calibration updates; shows
    the degradation trend) or ``autocal``. Returns a list of
    (std, final_loss, correlation-vs-truth) tuples.
    """
    if reconstructor not in ("reconstruct_only", "autocal"):
        raise ValidationError("reconstructor must be 'reconstruct_only' or 'autocal'")
    if schedule is None:
        schedule = AutocalSchedule(nonnegativity_projection=True)
    rows = []
    for std in stds:
        measured, cal_est, _cal_true = scenario(1, grid, volume_true, scene,
                                                float(std), seed,
                                                threads=threads, backend=backend)
        vol0 = initial_volume(cal_est, scene, measured,
                              volume_true.like_template(), threads=threads,
                              backend=backend)
        if reconstructor == "autocal":
            _, vol, report = autocal(cal_est, vol0, scene, measured, schedule,
                                     threads=threads, backend=backend)
        else:
            vol, report = reconstruct_only(cal_est, vol0, scene, measured,
                                           schedule, threads=threads,
                                           backend=backend)
        rows.append((float(std), report.records[-1].loss,
                     volume_correlation(vol, volume_true)))
    return rows


def pattern_recovery_test(scene: SceneConfig, grid: ScanGrid,
                          volume_true: Volume, spec: PerturbationSpec, *,
                          schedule: AutocalSchedule | None = None,
                          threads: int = 1, backend=None):
    """Autocal against a sinusoidal/parabolic radial perturbation of the scan
    array. Returns (initial_rmse, final_rmse) measured along each scan's
    perturbation direction."""
    if spec.kind not in ("sinusoidal_radial", "parabolic_radial"):
        raise ValidationError("pattern_recovery_test expects a radial pattern kind")
    if schedule is None:
        schedule = AutocalSchedule()
    cal_true = grid.calibration()
    cal_est = perturb(cal_true, spec, scene)
    measured = synthesize(cal_true, volume_true, scene, threads=threads,
                          backend=backend)
    dirs = radial_directions(cal_true, scene)
    initial = directional_rmse(cal_est, cal_true, dirs)
    vol0 = initial_volume(cal_est, scene, measured, volume_true.like_template(),
                          threads=threads, backend=backend)
    cal_final, _, _ = autocal(cal_est, vol0, scene, measured, schedule,
                              ground_truth=cal_true, threads=threads,
                              backend=backend)
    final = directional_rmse(cal_final, cal_true, dirs)
    return initial, final


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_heatmap_csv(path, ranges: np.ndarray, grid: ScanGrid):
    """Recovery ranges shaped as the scan raster: rows = y index, columns =
    x index (scan order is x-fastest)."""
    table = ranges.reshape((grid.nx, grid.ny), order="F")
    header = ["y\\x"] + [str(i) for i in range(grid.nx)]
    rows = [[str(iy)] + [repr(float(table[ix, iy])) for ix in range(grid.nx)]
            for iy in range(grid.ny)]
    write_csv(path, header, rows)
