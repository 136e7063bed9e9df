"""Dataset directory layout, readers/writers and the confocal adapter.

A dataset directory holds:

  scene.json        instrument/timing config, calibration estimate and the
                    volume grid metadata (human-readable decimal JSON)
  transients.f32    little-endian float32, [scan][detection][bin] order
  volume.f32        little-endian float32 albedo, x-fastest (optional)
  ground_truth.json true scan/detection positions (optional)

Bulk arrays are float32 on disk (and exactly representable after one
write/load cycle); in memory everything is float64. Readers reject files
whose byte length disagrees with the metadata.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import (MissingFileError, SizeMismatchError, ValidationError)
from .types import (CalibrationState, OptimizationReport, SceneConfig,
                    TransientSet, Volume)

SCENE_FILE = "scene.json"
TRANSIENTS_FILE = "transients.f32"
VOLUME_FILE = "volume.f32"
GROUND_TRUTH_FILE = "ground_truth.json"
REPORT_FILE = "report.json"


@dataclass(frozen=True, eq=False)
class Dataset:
    scene: SceneConfig
    calibration: CalibrationState
    volume: Volume | None  # albedo from volume.f32 when present
    transients: TransientSet
    ground_truth: CalibrationState | None
    grid_origin: tuple
    grid_pitch: tuple
    grid_dims: tuple

    def volume_template(self) -> Volume:
        return Volume.zeros(self.grid_origin, self.grid_pitch, self.grid_dims)


def _scene_to_dict(scene: SceneConfig) -> dict:
    return {
        "source_pos": list(scene.source_pos),
        "detector_pos": list(scene.detector_pos),
        "bin_width": scene.bin_width,
        "bin_count": scene.bin_count,
        "time_offset": scene.time_offset,
        "gaussian_sigma": scene.gaussian_sigma,
        "speed_of_light": scene.speed_of_light,
        "left_edge_bins": scene.left_edge_bins,
    }


def _cal_to_dict(cal: CalibrationState) -> dict:
    return {
        "scan_positions": cal.scan_positions.tolist(),
        "detection_positions": cal.detection_positions.tolist(),
        "update_mask": list(cal.update_mask),
    }


def _cal_from_dict(d: dict) -> CalibrationState:
    return CalibrationState(
        np.asarray(d["scan_positions"], dtype=np.float64),
        np.asarray(d["detection_positions"], dtype=np.float64),
        tuple(d.get("update_mask", (False, False, True))),
    )


def write_dataset(path, scene: SceneConfig, cal: CalibrationState,
                  volume: Volume, transients: TransientSet | None = None,
                  ground_truth: CalibrationState | None = None):
    """Write a dataset directory. ``volume`` always supplies the grid
    metadata; its albedo goes to volume.f32 (cast to float32)."""
    os.makedirs(path, exist_ok=True)
    doc = {
        "scene": _scene_to_dict(scene),
        "calibration": _cal_to_dict(cal),
        "volume": {
            "origin": list(volume.origin),
            "pitch": list(volume.voxel_pitch),
            "dims": list(volume.dims),
        },
    }
    with open(os.path.join(path, SCENE_FILE), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if transients is not None:
        transients.data.astype("<f4").tofile(os.path.join(path, TRANSIENTS_FILE))
    write_volume(os.path.join(path, VOLUME_FILE), volume)
    if ground_truth is not None:
        with open(os.path.join(path, GROUND_TRUTH_FILE), "w") as fh:
            json.dump(_cal_to_dict(ground_truth), fh, indent=2, sort_keys=True)
            fh.write("\n")


def write_volume(path, volume: Volume):
    volume.albedo.astype("<f4").tofile(path)


def _read_f32(path, expected_count, what):
    actual = os.path.getsize(path)
    if actual != 4 * expected_count:
        raise SizeMismatchError(
            f"{what}: expected {4 * expected_count} bytes for {expected_count} "
            f"float32 values, file has {actual}")
    return np.fromfile(path, dtype="<f4").astype(np.float64)


def load_dataset(path) -> Dataset:
    """Load and validate a dataset directory; see module docstring for the
    layout. Raises MissingFileError / SizeMismatchError / InvariantError."""
    scene_path = os.path.join(path, SCENE_FILE)
    if not os.path.isfile(scene_path):
        raise MissingFileError(f"{scene_path} not found")
    with open(scene_path) as fh:
        doc = json.load(fh)
    try:
        scene = SceneConfig(**doc["scene"])
        cal = _cal_from_dict(doc["calibration"])
        vol_meta = doc["volume"]
        origin = tuple(vol_meta["origin"])
        pitch = tuple(vol_meta["pitch"])
        dims = tuple(int(v) for v in vol_meta["dims"])
    except KeyError as exc:
        raise ValidationError(f"scene.json is missing key {exc}") from exc

    trans_path = os.path.join(path, TRANSIENTS_FILE)
    if not os.path.isfile(trans_path):
        raise MissingFileError(f"{trans_path} not found")
    count = cal.scan_count * cal.detection_count * scene.bin_count
    data = _read_f32(trans_path, count, TRANSIENTS_FILE)
    transients = TransientSet(data.reshape(
        (cal.scan_count, cal.detection_count, scene.bin_count)))

    volume = None
    vol_path = os.path.join(path, VOLUME_FILE)
    if os.path.isfile(vol_path):
        n = dims[0] * dims[1] * dims[2]
        volume = Volume(origin, pitch, dims, _read_f32(vol_path, n, VOLUME_FILE))

    ground_truth = None
    gt_path = os.path.join(path, GROUND_TRUTH_FILE)
    if os.path.isfile(gt_path):
        with open(gt_path) as fh:
            ground_truth = _cal_from_dict(json.load(fh))

    return Dataset(scene=scene, calibration=cal, volume=volume,
                   transients=transients, ground_truth=ground_truth,
                   grid_origin=origin, grid_pitch=pitch, grid_dims=dims)


def unrectify_confocal(rectified: TransientSet, cal: CalibrationState,
                       scene: SceneConfig, *, inverse: bool = False,
                       half_bin_offset: bool = False) -> TransientSet:
    """Shift rectified confocal histograms by the instrument legs.

    Rectified confocal data has its time origin at the relay wall (the
    source->scan and scan->detector legs stripped). Re-adding the legs to a
    chosen virtual source/detector makes the data consumable by the general
    model. Confocal layout: one detection channel whose focus point tracks
    the scan point, so ``cal.detection_positions`` must equal
    ``cal.scan_positions`` row for row and the data must have exactly one
    detection channel.

    ``inverse`` shifts the other way (re-rectify); ``half_bin_offset`` adds
    half a bin before rounding, for datasets whose time origin sits on a bin
    edge rather than a bin center. Tail bins shifted out are dropped, heads
    zero-padded; a shift of at least bin_count is an error.
    """
    if rectified.detection_count != 1:
        raise ValidationError(
            "confocal data must have exactly one detection channel per scan")
    if rectified.scan_count != cal.scan_count:
        raise ValidationError("transients and calibration scan counts differ")
    if cal.detection_positions.shape != cal.scan_positions.shape or \
            not np.array_equal(cal.detection_positions, cal.scan_positions):
        raise ValidationError(
            "confocal layout requires detection_positions == scan_positions")
    src_legs = np.linalg.norm(cal.scan_positions - scene.source()[None, :], axis=1)
    det_legs = np.linalg.norm(cal.scan_positions - scene.detector()[None, :], axis=1)
    extra = (src_legs + det_legs) / scene.bin_spacing_meters
    if half_bin_offset:
        extra = extra + 0.5
    shifts = np.floor(extra + 0.5).astype(np.int64)
    nbins = rectified.bin_count
    bad = np.where(shifts >= nbins)[0]
    if bad.size:
        raise ValidationError(
            f"scan {bad[0]}: shift of {shifts[bad[0]]} bins exceeds the "
            f"{nbins}-bin histogram")
    out = np.zeros_like(rectified.data)
    for j in range(rectified.scan_count):
        s = int(shifts[j])
        if inverse:
            out[j, 0, :nbins - s] = rectified.data[j, 0, s:]
        else:
            out[j, 0, s:] = rectified.data[j, 0, :nbins - s]
    return TransientSet(out)


def write_report(path, report: OptimizationReport, flags: dict | None = None):
    """report.json: full per-iteration trace plus the flag set that produced
    it, so a run is reconstructable from its report alone."""
    doc = report.to_dict()
    if flags is not None:
        doc["flags"] = flags
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
