"""Ground-truth synthesis, miscalibration scenarios and analytic phantoms.

The relay wall is the z = 0 plane; scan points live on it, the hidden volume
sits in front (z > 0), and the instrument (source/detector) is placed off to
the +x side, matching the layout used for the recoverability analysis. The
desk-scale defaults (16x16 scans over 1.28 m, 16^3 voxels of 8 cm, 512 bins
of 50 ps) keep a full autocal run in the minutes range while preserving the
geometry ratios of the reference experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .forward import forward_gaussian
from .types import (CalibrationState, SceneConfig, SPEED_OF_LIGHT,
                    TransientSet, Volume, default_sigma)

PERTURBATION_KINDS = ("gaussian_z", "gaussian_xyz", "sinusoidal_radial",
                      "parabolic_radial")


@dataclass(frozen=True)
class PerturbationSpec:
    """Miscalibration pattern applied to a CalibrationState.

    Gaussian kinds add iid noise (both scan and detection points, matching
    the simulated scenarios); pattern kinds displace each scan point along
    the line joining it to the transmitter by amplitude * pattern(t), with t
    the normalized x-extent coordinate and ``period`` the spatial period in
    meters (None -> one full cycle across the array).
    """

    kind: str
    std_dev: float = 0.0
    amplitude: float = 0.0
    period: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValidationError(
                f"unknown perturbation kind {self.kind!r}; expected one of {PERTURBATION_KINDS}")
        if self.std_dev < 0:
            raise ValidationError("std_dev must be >= 0")
        if self.amplitude < 0:
            raise ValidationError("amplitude must be >= 0")


def synthesize(cal_true: CalibrationState, volume_true: Volume,
               scene: SceneConfig, *, threads: int = 1, backend=None,
               poisson_seed: int | None = None) -> TransientSet:
    """Noiseless measurement from the true parameters: exactly the Gaussian
    forward model over all scans. ``poisson_seed`` optionally applies photon
    shot noise for robustness experiments; every validation run leaves it
    off."""
    out = forward_gaussian(cal_true, volume_true, scene, threads=threads,
                           backend=backend)
    if poisson_seed is None:
        return out
    rng = np.random.default_rng(poisson_seed)
    return TransientSet(rng.poisson(np.maximum(out.data, 0.0)).astype(np.float64))


def radial_directions(cal: CalibrationState, scene: SceneConfig) -> np.ndarray:
    """Unit vectors from the transmitter through each scan point."""
    v = cal.scan_positions - scene.source()[None, :]
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0):
        raise ValidationError("a scan point coincides with the transmitter")
    return v / norms[:, None]


def _pattern_values(cal: CalibrationState, spec: PerturbationSpec) -> np.ndarray:
    x = cal.scan_positions[:, 0]
    extent = float(x.max() - x.min())
    if extent == 0.0:
        t = np.zeros_like(x)
        extent = 1.0
    else:
        t = (x - x.min()) / extent
    if spec.kind == "sinusoidal_radial":
        period = spec.period if spec.period is not None else extent
        return np.sin(2.0 * np.pi * (t * extent) / period)
    # parabolic: zero at the array center, +amplitude at both x edges
    return (2.0 * t - 1.0) ** 2


def perturb(cal: CalibrationState, spec: PerturbationSpec,
            scene: SceneConfig | None = None) -> CalibrationState:
    """Apply a PerturbationSpec; deterministic given spec.rng_seed.

    Pattern kinds need ``scene`` for the transmitter position.
    """
    rng = np.random.default_rng(spec.rng_seed)
    scan = cal.scan_positions.copy()
    det = cal.detection_positions.copy()
    if spec.kind == "gaussian_z":
        scan[:, 2] += rng.normal(0.0, spec.std_dev, scan.shape[0])
        det[:, 2] += rng.normal(0.0, spec.std_dev, det.shape[0])
    elif spec.kind == "gaussian_xyz":
        scan += rng.normal(0.0, spec.std_dev, scan.shape)
        det += rng.normal(0.0, spec.std_dev, det.shape)
    else:
        if scene is None:
            raise ValidationError(f"{spec.kind} perturbation needs the scene for the transmitter position")
        disp = spec.amplitude * _pattern_values(cal, spec)
        scan += disp[:, None] * radial_directions(cal, scene)
    return cal.with_positions(scan, det)


@dataclass(frozen=True)
class ScanGrid:
    """Planar scan raster on the relay wall plus the fixed detection spot(s)."""

    nx: int = 16
    ny: int = 16
    width: float = 1.28
    height: float = 1.28
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    detection_positions: tuple = ((0.45, 0.0, 0.0),)

    def positions(self) -> np.ndarray:
        px = self.width / self.nx
        py = self.height / self.ny
        xs = self.center[0] - self.width / 2 + (np.arange(self.nx) + 0.5) * px
        ys = self.center[1] - self.height / 2 + (np.arange(self.ny) + 0.5) * py
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pos = np.stack([gx.ravel(order="F"), gy.ravel(order="F"),
                        np.full(self.nx * self.ny, float(self.center[2]))], axis=1)
        return pos

    def calibration(self, update_mask=(False, False, True)) -> CalibrationState:
        return CalibrationState(self.positions(),
                                np.asarray(self.detection_positions, dtype=np.float64),
                                update_mask)


def scenario(name: int, grid: ScanGrid, volume_true: Volume,
             scene: SceneConfig, noise_std: float, seed: int = 0, *,
             threads: int = 1, backend=None):
    """The three miscalibration scenarios.

    1: truth on the planar grid, estimate = z-noised truth.
    2: estimate on the planar grid, truth = z-noised grid (bumpy wall).
    3: truth on the grid, estimate noised on all three axes.

    Returns (measured, cal_initial_estimate, cal_true); the measurement is
    always synthesized from the truth.
    """
    if name not in (1, 2, 3):
        raise ValidationError(f"scenario must be 1, 2 or 3, got {name!r}")
    grid_cal = grid.calibration()
    kind = "gaussian_xyz" if name == 3 else "gaussian_z"
    spec = PerturbationSpec(kind=kind, std_dev=noise_std, rng_seed=seed)
    noisy = perturb(grid_cal, spec)
    if name == 2:
        cal_true, cal_est = noisy, grid_cal
    else:
        cal_true, cal_est = grid_cal, noisy
    measured = synthesize(cal_true, volume_true, scene, threads=threads,
                          backend=backend)
    return measured, cal_est, cal_true


PHANTOM_NAMES = ("single_voxel", "hemisphere", "plane", "sigma_glyph")

_SIGMA_POLYLINE = [(0.85, 0.85), (0.15, 0.85), (0.6, 0.5), (0.15, 0.15), (0.85, 0.15)]


def _hemisphere_mask(centers, center, radius):
    rel = centers - np.asarray(center)[None, :]
    inside = np.einsum("ij,ij->i", rel, rel) <= radius * radius
    return inside & (rel[:, 2] <= 0.0)  # flat face away from, dome toward, the wall


def make_phantom(name: str, volume_template: Volume, *, depth: float | None = None,
                 radius: float | None = None) -> Volume:
    """Fill the template with an analytic shape (binary albedo).

    ``depth`` defaults to the template's z mid-plane; the hemisphere radius
    defaults to 30% of the smallest lateral extent, dome facing the wall.
    """
    vol = volume_template
    centers = vol.centers()
    lo = np.array(vol.origin)
    hi = lo + np.array(vol.dims) * np.array(vol.voxel_pitch)
    mid = 0.5 * (lo + hi)
    if depth is None:
        depth = float(mid[2])
    rho = np.zeros(vol.voxel_count)
    if name == "single_voxel":
        target = np.array([mid[0], mid[1], depth])
        rho[int(np.argmin(np.linalg.norm(centers - target[None, :], axis=1)))] = 1.0
    elif name == "hemisphere":
        if radius is None:
            radius = 0.3 * min(hi[0] - lo[0], hi[1] - lo[1])
        rho[_hemisphere_mask(centers, (mid[0], mid[1], depth), radius)] = 1.0
    elif name == "plane":
        iz = int(np.clip(np.floor((depth - lo[2]) / vol.voxel_pitch[2]), 0, vol.dims[2] - 1))
        z_lo = lo[2] + iz * vol.voxel_pitch[2]
        on_slice = (centers[:, 2] > z_lo) & (centers[:, 2] < z_lo + vol.voxel_pitch[2])
        rho[on_slice] = 1.0
    elif name == "sigma_glyph":
        iz = int(np.clip(np.floor((depth - lo[2]) / vol.voxel_pitch[2]), 0, vol.dims[2] - 1))
        z_lo = lo[2] + iz * vol.voxel_pitch[2]
        on_slice = (centers[:, 2] > z_lo) & (centers[:, 2] < z_lo + vol.voxel_pitch[2])
        u = (centers[:, 0] - lo[0]) / (hi[0] - lo[0])
        v = (centers[:, 1] - lo[1]) / (hi[1] - lo[1])
        pts = np.stack([u, v], axis=1)
        thick = 1.2 * max(vol.voxel_pitch[0] / (hi[0] - lo[0]),
                          vol.voxel_pitch[1] / (hi[1] - lo[1]))
        near = np.zeros(vol.voxel_count, dtype=bool)
        for (ax, ay), (bx, by) in zip(_SIGMA_POLYLINE[:-1], _SIGMA_POLYLINE[1:]):
            a = np.array([ax, ay])
            b = np.array([bx, by])
            ab = b - a
            tt = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
            dist = np.linalg.norm(pts - (a + tt[:, None] * ab), axis=1)
            near |= dist <= thick
        rho[on_slice & near] = 1.0
    else:
        raise ValidationError(f"unknown phantom {name!r}; expected one of {PHANTOM_NAMES}")
    return vol.with_albedo(rho)


def desk_scene(*, nx: int = 16, ny: int = 16, voxels: int = 16,
               bins: int = 512, bin_width: float = 50e-12,
               sigma: float | None = None) -> tuple[SceneConfig, ScanGrid, Volume]:
    """Desk-scale defaults shared by the CLI and the validation suite.

    The time offset parks the 512-bin window over the populated path-length
    range (roughly 3 m to 7.7 m for this layout).
    """
    extent = 1.28
    grid = ScanGrid(nx=nx, ny=ny, width=extent, height=extent)
    pitch = extent / voxels
    template = Volume.zeros(
        origin=(-extent / 2, -extent / 2, 1.0 - extent / 2),
        voxel_pitch=(pitch, pitch, pitch),
        dims=(voxels, voxels, voxels),
    )
    scene = SceneConfig(
        source_pos=(1.1, 0.0, 1.0),
        detector_pos=(1.05, -0.05, 0.95),
        bin_width=bin_width,
        bin_count=bins,
        time_offset=2.6 / SPEED_OF_LIGHT,
        gaussian_sigma=sigma if sigma is not None else default_sigma(bin_width),
    )
    return scene, grid, template
