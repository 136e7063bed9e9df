import time

import numpy as np
import nlos_autocal as na

t0 = time.time()
scene, grid, template = na.desk_scene()
print("sigma_m:", scene.sigma_meters, "cdt:", scene.bin_spacing_meters,
      "base:", scene.bin_base_meters)
vol_true = na.make_phantom("hemisphere", template)
print("phantom voxels:", (vol_true.albedo > 0).sum())

measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, 0.05, seed=1,
                                          threads=4)
print("synthesize:", f"{time.time()-t0:.1f}s", "max I:", measured.data.max())
print("initial z-RMSE:", na.scan_rmse(cal_est, cal_true, (False, False, True)))

# sanity: d_total range within binned window?
ws = na.ForwardWorkspace.build(cal_true, vol_true, scene)
import itertools
d_min, d_max = 1e9, -1e9
for m in range(1):
    for j in [0, 127, 255]:
        r_l = np.linalg.norm(cal_true.scan_positions[j] - ws.centers, axis=1)
        r_s = np.linalg.norm(cal_true.detection_positions[m] - ws.centers, axis=1)
        d = r_l + r_s + ws.source_legs[j] + ws.detector_legs[m]
        d_min, d_max = min(d_min, d.min()), max(d_max, d.max())
print("d_total range:", d_min, d_max, "window:", ws.base, ws.base + ws.cdt * 511)

t0 = time.time()
vol0 = na.initial_volume(cal_est, scene, measured, template, threads=4)
print("backproject+scale:", f"{time.time()-t0:.1f}s",
      "corr(vol0, truth):", na.volume_correlation(vol0, vol_true))

t0 = time.time()
sched = na.AutocalSchedule(rng_seed=17)
cal_fin, vol_fin, report = na.autocal(cal_est, vol0, scene, measured, sched,
                                      ground_truth=cal_true, threads=4)
print("autocal:", f"{time.time()-t0:.1f}s")
zr = [r.scan_rmse_z for r in report.records]
print("z-RMSE trajectory:", [f"{v:.4f}" for v in zr[::20]], "final:",
      f"{na.scan_rmse(cal_fin, cal_true, (False, False, True)):.4f}")
print("corr(vol_fin, truth):", na.volume_correlation(vol_fin, vol_true))
losses = report.losses()
print("loss first/last:", losses[0], losses[-1])
