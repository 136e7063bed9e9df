import time

import numpy as np
import nlos_autocal as na

DETS = ((0.45, 0.0, 0.0), (-0.45, 0.35, 0.0), (0.0, -0.45, 0.0))
scene, grid0, template = na.desk_scene()
grid = na.ScanGrid(nx=grid0.nx, ny=grid0.ny, width=grid0.width,
                   height=grid0.height, detection_positions=DETS)

for phantom in ("hemisphere", "single_voxel"):
    vol_true = na.make_phantom(phantom, template)
    measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, 0.04, seed=1, threads=4)
    print("---", phantom)

    # truth-volume calib-only: detector upper bound with 3 detections
    sched = na.AutocalSchedule(total_iterations=1, calib_iterations=160,
                               reconstruction_iterations=0, rng_seed=17)
    cal_fix, _, rep = na.autocal(cal_est, vol_true, scene, measured, sched,
                                 ground_truth=cal_true, threads=4)
    det_err = cal_fix.detection_positions[:, 2] - cal_true.detection_positions[:, 2]
    print(f"true-vol calib-only: z {rep.records[0].scan_rmse_z:.4f}->"
          f"{na.scan_rmse(cal_fix, cal_true, (0,0,1)):.4f} det {np.round(det_err*100,1)}cm")

    # autocal with nonneg projection on
    v0 = na.initial_volume(cal_est, scene, measured, template, threads=4)
    for proj in (True, False):
        sched = na.AutocalSchedule(rng_seed=17, nonnegativity_projection=proj)
        cal_fix, volA, rep = na.autocal(cal_est, v0, scene, measured, sched,
                                        ground_truth=cal_true, threads=4)
        det_err = cal_fix.detection_positions[:, 2] - cal_true.detection_positions[:, 2]
        print(f"autocal proj={proj}: z ->{na.scan_rmse(cal_fix, cal_true, (0,0,1)):.4f} "
              f"det {np.round(det_err*100,1)}cm")
