"""Shared domain types and the geometric primitives every module builds on.

Conventions fixed here and relied on everywhere else:

* albedo is stored flat, x-fastest (``flat = ix + nx*(iy + ny*iz)``);
* the Gaussian width is stored in seconds and converted once to meters
  (``sigma_m = c * gaussian_sigma``) so all exponent arithmetic happens in
  path-length units;
* time bins are referenced by their center, ``t_k = (k + 0.5)*bin_width +
  time_offset``, unless ``left_edge_bins`` asks for the literal left-edge
  convention ``t_k = k*bin_width + time_offset``.

All types are immutable value objects; "mutation" is copy-and-replace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatchError, InvariantError, ValidationError

SPEED_OF_LIGHT = 299792458.0


def _readonly(a, shape=None, name="", type_name=""):
    arr = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    if shape is not None and arr.shape != shape:
        raise InvariantError(type_name, name, f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvariantError(type_name, name, "contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SceneConfig:
    """Instrument geometry and timing.

    ``source_pos``/``detector_pos`` are the fixed laser and SPAD positions;
    meters. ``bin_width`` seconds, ``time_offset`` seconds (added to every
    bin's nominal arrival time), ``gaussian_sigma`` seconds.
    """

    source_pos: tuple[float, float, float]
    detector_pos: tuple[float, float, float]
    bin_width: float
    bin_count: int
    time_offset: float = 0.0
    gaussian_sigma: float = 0.0  # 0.0 placeholder rejected below
    speed_of_light: float = SPEED_OF_LIGHT
    left_edge_bins: bool = False

    def __post_init__(self):
        object.__setattr__(self, "source_pos", tuple(float(v) for v in self.source_pos))
        object.__setattr__(self, "detector_pos", tuple(float(v) for v in self.detector_pos))
        if len(self.source_pos) != 3:
            raise InvariantError("SceneConfig", "source_pos", "must be a 3-vector")
        if len(self.detector_pos) != 3:
            raise InvariantError("SceneConfig", "detector_pos", "must be a 3-vector")
        for name in ("source_pos", "detector_pos"):
            if not all(math.isfinite(v) for v in getattr(self, name)):
                raise InvariantError("SceneConfig", name, "must be finite")
        if not (self.bin_width > 0 and math.isfinite(self.bin_width)):
            raise InvariantError("SceneConfig", "bin_width", "must be > 0")
        if int(self.bin_count) < 1:
            raise InvariantError("SceneConfig", "bin_count", "must be >= 1")
        object.__setattr__(self, "bin_count", int(self.bin_count))
        if not (self.gaussian_sigma > 0 and math.isfinite(self.gaussian_sigma)):
            raise InvariantError("SceneConfig", "gaussian_sigma", "must be > 0")
        if not (self.speed_of_light > 0 and math.isfinite(self.speed_of_light)):
            raise InvariantError("SceneConfig", "speed_of_light", "must be > 0")
        if not math.isfinite(self.time_offset):
            raise InvariantError("SceneConfig", "time_offset", "must be finite")

    @property
    def sigma_meters(self) -> float:
        return self.speed_of_light * self.gaussian_sigma

    @property
    def bin_spacing_meters(self) -> float:
        return self.speed_of_light * self.bin_width

    @property
    def bin_base_meters(self) -> float:
        """c * t_0 of bin 0, i.e. bin k sits at ``bin_base + k*bin_spacing``."""
        gamma = 0.0 if self.left_edge_bins else 0.5
        return self.speed_of_light * (gamma * self.bin_width + self.time_offset)

    def source(self) -> np.ndarray:
        return np.asarray(self.source_pos, dtype=np.float64)

    def detector(self) -> np.ndarray:
        return np.asarray(self.detector_pos, dtype=np.float64)


def default_sigma(bin_width: float) -> float:
    """Default Gaussian width: 2 bins, wide enough to straddle neighbours."""
    return 2.0 * bin_width


@dataclass(frozen=True, eq=False)
class CalibrationState:
    """Current estimates of the laser scan points l_j and detector focus
    points s_m on the relay wall, plus the per-axis gradient mask."""

    scan_positions: np.ndarray  # (p, 3) meters
    detection_positions: np.ndarray  # (q, 3) meters
    update_mask: tuple[bool, bool, bool] = (False, False, True)

    def __post_init__(self):
        sp = _readonly(self.scan_positions, name="scan_positions", type_name="CalibrationState")
        dp = _readonly(self.detection_positions, name="detection_positions", type_name="CalibrationState")
        for name, arr in (("scan_positions", sp), ("detection_positions", dp)):
            if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
                raise InvariantError("CalibrationState", name, "must be a non-empty (n, 3) array")
        object.__setattr__(self, "scan_positions", sp)
        object.__setattr__(self, "detection_positions", dp)
        mask = tuple(bool(v) for v in self.update_mask)
        if len(mask) != 3:
            raise InvariantError("CalibrationState", "update_mask", "must have 3 entries")
        object.__setattr__(self, "update_mask", mask)

    @property
    def scan_count(self) -> int:
        return self.scan_positions.shape[0]

    @property
    def detection_count(self) -> int:
        return self.detection_positions.shape[0]

    def mask_array(self) -> np.ndarray:
        return np.array(self.update_mask, dtype=np.float64)

    def with_positions(self, scan_positions=None, detection_positions=None) -> "CalibrationState":
        return replace(
            self,
            scan_positions=self.scan_positions if scan_positions is None else scan_positions,
            detection_positions=self.detection_positions if detection_positions is None else detection_positions,
        )


@dataclass(frozen=True, eq=False)
class Volume:
    """Axis-aligned voxel grid with a flat, x-fastest albedo array.

    Voxel centers are derived, never stored:
    ``o = origin + (index + 0.5) * pitch`` per axis.
    """

    origin: tuple[float, float, float]
    voxel_pitch: tuple[float, float, float]
    dims: tuple[int, int, int]
    albedo: np.ndarray

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        pitch = tuple(float(v) for v in self.voxel_pitch)
        dims = tuple(int(v) for v in self.dims)
        if len(origin) != 3 or not all(math.isfinite(v) for v in origin):
            raise InvariantError("Volume", "origin", "must be a finite 3-vector")
        if len(pitch) != 3 or not all(v > 0 and math.isfinite(v) for v in pitch):
            raise InvariantError("Volume", "voxel_pitch", "must be > 0 per axis")
        if len(dims) != 3 or not all(v >= 1 for v in dims):
            raise InvariantError("Volume", "dims", "must be >= 1 per axis")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "voxel_pitch", pitch)
        object.__setattr__(self, "dims", dims)
        alb = _readonly(self.albedo, name="albedo", type_name="Volume")
        if alb.ndim != 1 or alb.shape[0] != dims[0] * dims[1] * dims[2]:
            raise InvariantError("Volume", "albedo", f"length must be {dims[0] * dims[1] * dims[2]}")
        object.__setattr__(self, "albedo", alb)

    @classmethod
    def zeros(cls, origin, voxel_pitch, dims) -> "Volume":
        dims = tuple(int(v) for v in dims)
        return cls(origin, voxel_pitch, dims, np.zeros(dims[0] * dims[1] * dims[2]))

    @property
    def voxel_count(self) -> int:
        return self.albedo.shape[0]

    def with_albedo(self, albedo) -> "Volume":
        return replace(self, albedo=albedo)

    def like_template(self) -> "Volume":
        return Volume.zeros(self.origin, self.voxel_pitch, self.dims)

    def centers(self) -> np.ndarray:
        """All voxel centers as an (N, 3) array in flat-index order."""
        nx, ny, nz = self.dims
        ax = [self.origin[d] + (np.arange(self.dims[d]) + 0.5) * self.voxel_pitch[d] for d in range(3)]
        gx, gy, gz = np.meshgrid(ax[0], ax[1], ax[2], indexing="ij")
        out = np.stack(
            [gx.ravel(order="F"), gy.ravel(order="F"), gz.ravel(order="F")], axis=1
        )
        return np.ascontiguousarray(out)

    def grid(self) -> np.ndarray:
        """Albedo as a (nx, ny, nz) view consistent with the flat order."""
        return self.albedo.reshape(self.dims, order="F")


def voxel_index_to_ijk(volume: Volume, flat_index: int) -> tuple[int, int, int]:
    nx, ny, nz = volume.dims
    n = nx * ny * nz
    i = int(flat_index)
    if not 0 <= i < n:
        raise ValidationError(f"flat_index {i} out of range [0, {n})")
    return (i % nx, (i // nx) % ny, i // (nx * ny))


def voxel_center(volume: Volume, flat_index: int) -> np.ndarray:
    """Center of the voxel at ``flat_index`` (x-fastest order)."""
    ijk = voxel_index_to_ijk(volume, flat_index)
    return np.array(
        [volume.origin[d] + (ijk[d] + 0.5) * volume.voxel_pitch[d] for d in range(3)]
    )


def total_path_length(l, s, o, scene: SceneConfig) -> float:
    """Three-bounce path length: source -> l -> o -> s -> detector.

    The grouping (wall legs first, instrument legs second) keeps the value
    bit-identical under the (l, source) <-> (s, detector) swap.
    """
    l = np.asarray(l, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    o = np.asarray(o, dtype=np.float64)
    for name, v in (("l", l), ("s", s), ("o", o)):
        if not np.all(np.isfinite(v)):
            raise InvariantError("total_path_length", name, "must be finite")
    r_l = float(np.linalg.norm(l - o))
    r_s = float(np.linalg.norm(s - o))
    leg_l = float(np.linalg.norm(scene.source() - l))
    leg_s = float(np.linalg.norm(scene.detector() - s))
    return (r_l + r_s) + (leg_l + leg_s)


@dataclass(frozen=True, eq=False)
class TransientSet:
    """Histogram stack indexed [scan j][detection m][time bin k]."""

    data: np.ndarray  # (p, q, K)

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 3:
            raise InvariantError("TransientSet", "data", "must be a (scan, detection, bin) array")
        if not np.all(np.isfinite(arr)):
            raise InvariantError("TransientSet", "data", "contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def scan_count(self) -> int:
        return self.data.shape[0]

    @property
    def detection_count(self) -> int:
        return self.data.shape[1]

    @property
    def bin_count(self) -> int:
        return self.data.shape[2]

    def check_matches(self, cal: CalibrationState, scene: SceneConfig):
        if self.scan_count != cal.scan_count:
            raise DimensionMismatchError(
                f"transients have {self.scan_count} scans, calibration has {cal.scan_count}"
            )
        if self.detection_count != cal.detection_count:
            raise DimensionMismatchError(
                f"transients have {self.detection_count} detections, calibration has {cal.detection_count}"
            )
        if self.bin_count != scene.bin_count:
            raise DimensionMismatchError(
                f"transients have {self.bin_count} bins, scene has {scene.bin_count}"
            )

    def rows(self, scan_subset) -> np.ndarray:
        return np.ascontiguousarray(self.data[np.asarray(scan_subset, dtype=np.intp)])


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    phase: str  # "calibration" | "reconstruction"
    loss: float
    scan_rmse_z: float | None = None
    scan_rmse_all: float | None = None


@dataclass(frozen=True, eq=False)
class OptimizationReport:
    """Per-iteration trace plus the final state of an optimization run."""

    records: tuple[IterationRecord, ...]
    final_calibration: CalibrationState
    final_volume: Volume
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        records = tuple(self.records)
        last = -1
        for r in records:
            if r.iteration <= last:
                raise InvariantError("OptimizationReport", "records", "iteration indices must be strictly increasing")
            last = r.iteration
            if not math.isfinite(r.loss):
                raise InvariantError("OptimizationReport", "records", f"non-finite loss at iteration {r.iteration}")
        object.__setattr__(self, "records", records)

    def losses(self, phase=None) -> np.ndarray:
        return np.array([r.loss for r in self.records if phase is None or r.phase == phase])

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "records": [
                {
                    "iteration": r.iteration,
                    "phase": r.phase,
                    "loss": r.loss,
                    "scan_rmse_z": r.scan_rmse_z,
                    "scan_rmse_all": r.scan_rmse_all,
                }
                for r in self.records
            ],
            "final": {
                "scan_positions": self.final_calibration.scan_positions.tolist(),
                "detection_positions": self.final_calibration.detection_positions.tolist(),
                "update_mask": list(self.final_calibration.update_mask),
            },
        }
