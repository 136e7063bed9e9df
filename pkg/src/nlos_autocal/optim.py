"""Adam and the alternating calibration/reconstruction loop.

One outer repeat runs the calibration phase first (scan/detection positions,
axis-masked), then the reconstruction phase (albedo), each with stochastic
scan batches drawn without replacement until the scan set is exhausted and
reshuffled. Moment accumulators are kept per parameter block and persist
across phases for the whole run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GradientError, ValidationError
from .forward import DEFAULT_TRUNCATION_SIGMAS, DEGENERACY_EPS
from .gradients import _grad_eval
from .types import (CalibrationState, IterationRecord, OptimizationReport,
                    SceneConfig, TransientSet, Volume)


@dataclass(frozen=True, eq=False)
class AdamState:
    """Moment accumulators for one parameter block; functional updates."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    name: str = "params"

    def __post_init__(self):
        if self.step < 0:
            raise ValidationError("AdamState.step must be >= 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValidationError("AdamState betas must lie in [0, 1)")
        if self.m.shape != self.v.shape:
            raise ValidationError("AdamState moment shapes disagree")

    @classmethod
    def for_params(cls, params, *, learning_rate=0.01, beta1=0.9, beta2=0.999,
                   eps=1e-8, name="params") -> "AdamState":
        params = np.asarray(params)
        return cls(m=np.zeros_like(params, dtype=np.float64),
                   v=np.zeros_like(params, dtype=np.float64),
                   learning_rate=learning_rate, beta1=beta1, beta2=beta2,
                   eps=eps, name=name)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray):
    """One bias-corrected Adam update. Returns (new_params, new_state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != state.m.shape or grads.shape != params.shape:
        raise ValidationError(
            f"adam_step('{state.name}'): parameter/gradient shapes disagree")
    if not np.all(np.isfinite(grads)):
        raise GradientError(f"non-finite gradient in block '{state.name}'")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * (grads * grads)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, step=t)


@dataclass(frozen=True)
class AutocalSchedule:
    """Alternation plan and hyperparameters (defaults mirror the reference
    recipe: 4 repeats of 20+20 iterations, lr 0.01, ~10% scan batches)."""

    total_iterations: int = 4
    calib_iterations: int = 20
    reconstruction_iterations: int = 20
    scan_subsample_fraction: float = 0.1
    rng_seed: int = 0
    nonnegativity_projection: bool = False
    albedo_clip_max: float | None = None
    batch_size: int | None = None  # None -> ceil(fraction * scan_count)
    update_detections: bool = True  # freeze the detector focus point if False
    detection_lr_scale: float = 1.0  # detector step size relative to scans
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if min(self.total_iterations, self.calib_iterations,
               self.reconstruction_iterations) < 0:
            raise ValidationError("schedule iteration counts must be >= 0")
        if not (0.0 < self.scan_subsample_fraction <= 1.0):
            raise ValidationError("scan_subsample_fraction must lie in (0, 1]")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")

    def resolved_batch_size(self, scan_count: int) -> int:
        if self.batch_size is not None:
            return min(self.batch_size, scan_count)
        return max(1, min(scan_count, int(np.ceil(self.scan_subsample_fraction * scan_count))))


class ScanBatchSampler:
    """Without-replacement batches: a shuffled permutation is consumed batch
    by batch; once exhausted it is reshuffled. Deterministic given the seed."""

    def __init__(self, scan_count: int, batch_size: int, seed: int):
        self.scan_count = scan_count
        self.batch_size = min(batch_size, scan_count)
        self.rng = np.random.default_rng(seed)
        self._perm = np.array([], dtype=np.intp)
        self._pos = 0

    def next_batch(self) -> np.ndarray:
        if self.batch_size >= self.scan_count:
            return np.arange(self.scan_count, dtype=np.intp)
        if self._pos >= self._perm.size:
            self._perm = self.rng.permutation(self.scan_count).astype(np.intp)
            self._pos = 0
        batch = self._perm[self._pos:self._pos + self.batch_size]
        self._pos += batch.size
        return np.sort(batch)


@dataclass
class _RunState:
    cal: CalibrationState
    volume: Volume
    records: list = field(default_factory=list)
    iteration: int = 0


def _record(run: _RunState, phase, loss_value, ground_truth):
    from .analysis import scan_rmse  # deferred: analysis imports this module

    rmse_z = rmse_all = None
    if ground_truth is not None:
        rmse_z = scan_rmse(run.cal, ground_truth, axes=(False, False, True))
        rmse_all = scan_rmse(run.cal, ground_truth, axes=(True, True, True))
    run.records.append(IterationRecord(run.iteration, phase, loss_value,
                                       rmse_z, rmse_all))
    run.iteration += 1


def _finish(run: _RunState, schedule, extra_config):
    config = {"schedule": {
        "total_iterations": schedule.total_iterations,
        "calib_iterations": schedule.calib_iterations,
        "reconstruction_iterations": schedule.reconstruction_iterations,
        "scan_subsample_fraction": schedule.scan_subsample_fraction,
        "rng_seed": schedule.rng_seed,
        "nonnegativity_projection": schedule.nonnegativity_projection,
        "albedo_clip_max": schedule.albedo_clip_max,
        "batch_size": schedule.batch_size,
        "update_detections": schedule.update_detections,
        "learning_rate": schedule.learning_rate,
        "beta1": schedule.beta1,
        "beta2": schedule.beta2,
        "adam_eps": schedule.adam_eps,
    }}
    config.update(extra_config or {})
    return OptimizationReport(records=tuple(run.records),
                              final_calibration=run.cal,
                              final_volume=run.volume,
                              config=config)


def _apply_albedo_bounds(rho, schedule):
    if schedule.nonnegativity_projection:
        rho = np.maximum(rho, 0.0)
    if schedule.albedo_clip_max is not None:
        rho = np.minimum(rho, schedule.albedo_clip_max)
    return rho


def autocal(cal0: CalibrationState, volume0: Volume, scene: SceneConfig,
            measured: TransientSet, schedule: AutocalSchedule, *,
            ground_truth: CalibrationState | None = None,
            truncation=DEFAULT_TRUNCATION_SIGMAS, threads: int = 1,
            backend=None, report_sink=None, snapshot_sink=None,
            config_extra: dict | None = None):
    """Alternating gradient descent on calibration and albedo (AUTOCAL).

    Returns (CalibrationState, Volume, OptimizationReport). ``report_sink``
    (a callable taking the partial report) is flushed when an iteration
    raises, for post-mortem inspection. ``snapshot_sink``, when given, is
    called as ``snapshot_sink(iteration, volume)`` after every reconstruction
    phase.
    """
    measured.check_matches(cal0, scene)
    if schedule.total_iterations * schedule.calib_iterations > 0 and not any(cal0.update_mask):
        raise ValidationError(
            "calibration updates requested but update_mask disables every axis")
    run = _RunState(cal=cal0, volume=volume0)
    sampler = ScanBatchSampler(cal0.scan_count,
                               schedule.resolved_batch_size(cal0.scan_count),
                               schedule.rng_seed)
    kw = dict(learning_rate=schedule.learning_rate, beta1=schedule.beta1,
              beta2=schedule.beta2, eps=schedule.adam_eps)
    adam_rho = AdamState.for_params(volume0.albedo, name="rho", **kw)
    adam_scan = AdamState.for_params(cal0.scan_positions, name="scan", **kw)
    adam_det = AdamState.for_params(cal0.detection_positions, name="detect", **kw)
    mask = cal0.mask_array()
    grad_kw = dict(truncation=truncation, threads=threads, backend=backend,
                   eps=DEGENERACY_EPS)

    try:
        for _ in range(schedule.total_iterations):
            for _ in range(schedule.calib_iterations):
                batch = sampler.next_batch()
                bundle, batch_loss = _grad_eval(run.cal, run.volume, scene,
                                                measured, batch, need_pos=True,
                                                **grad_kw)
                bundle.check_finite()
                _record(run, "calibration", batch_loss, ground_truth)
                new_scan, adam_scan = adam_step(
                    adam_scan, run.cal.scan_positions, bundle.d_scan * mask[None, :])
                det_mask = mask if schedule.update_detections else np.zeros(3)
                new_det, adam_det = adam_step(
                    adam_det, run.cal.detection_positions, bundle.d_detect * det_mask[None, :])
                run.cal = run.cal.with_positions(new_scan, new_det)
            for _ in range(schedule.reconstruction_iterations):
                batch = sampler.next_batch()
                bundle, batch_loss = _grad_eval(run.cal, run.volume, scene,
                                                measured, batch, need_pos=False,
                                                **grad_kw)
                bundle.check_finite()
                _record(run, "reconstruction", batch_loss, ground_truth)
                new_rho, adam_rho = adam_step(adam_rho, run.volume.albedo,
                                              bundle.d_rho)
                run.volume = run.volume.with_albedo(
                    _apply_albedo_bounds(new_rho, schedule))
            if snapshot_sink is not None and schedule.reconstruction_iterations > 0:
                snapshot_sink(run.iteration, run.volume)
    except Exception:
        if report_sink is not None:
            report_sink(_finish(run, schedule, config_extra))
        raise
    report = _finish(run, schedule, config_extra)
    if report_sink is not None:
        report_sink(report)
    return run.cal, run.volume, report


def reconstruct_only(cal: CalibrationState, volume0: Volume, scene: SceneConfig,
                     measured: TransientSet, schedule: AutocalSchedule, *,
                     truncation=DEFAULT_TRUNCATION_SIGMAS, threads: int = 1,
                     backend=None, ground_truth=None, config_extra=None):
    """Reconstruction iterations only, calibration held fixed. With full
    batches this is a convex least-squares descent (the model is linear in
    the albedo). Returns (Volume, OptimizationReport)."""
    recon_schedule = replace(schedule, calib_iterations=0)
    _, vol, report = autocal(cal, volume0, scene, measured, recon_schedule,
                             ground_truth=ground_truth, truncation=truncation,
                             threads=threads, backend=backend,
                             config_extra=config_extra)
    return vol, report
