import time

import numpy as np
import nlos_autocal as na

DETS = ((0.45, 0.0, 0.0), (-0.45, 0.35, 0.0), (0.0, -0.45, 0.0))

for sig_mult in (2, 4):
    scene, grid0, template = na.desk_scene(sigma=sig_mult * 50e-12)
    grid = na.ScanGrid(nx=grid0.nx, ny=grid0.ny, width=grid0.width,
                       height=grid0.height, detection_positions=DETS)
    tail = na.AutocalSchedule(total_iterations=1, calib_iterations=0,
                              reconstruction_iterations=400,
                              scan_subsample_fraction=0.25,
                              nonnegativity_projection=True,
                              learning_rate=0.05, rng_seed=3)
    print(f"=== sigma={sig_mult}dt, 3 detections")
    for phantom in ("single_voxel", "hemisphere"):
        vol_true = na.make_phantom(phantom, template)
        m0, e0, _ = na.scenario(1, grid, vol_true, scene, 0.0, seed=1, threads=4)
        v00 = na.initial_volume(e0, scene, m0, template, threads=4)
        volb, _ = na.reconstruct_only(e0, v00, scene, m0, tail, threads=4)
        base = na.volume_correlation(volb, vol_true)

        measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, 0.04, seed=1, threads=4)
        v0 = na.initial_volume(cal_est, scene, measured, template, threads=4)
        t0 = time.time()
        cal_fix, volA, rep = na.autocal(cal_est, v0, scene, measured,
                                        na.AutocalSchedule(rng_seed=17),
                                        ground_truth=cal_true, threads=4)
        det_err = cal_fix.detection_positions[:, 2] - cal_true.detection_positions[:, 2]
        z = na.scan_rmse(cal_fix, cal_true, (0, 0, 1))
        v1 = na.initial_volume(cal_fix, scene, measured, template, threads=4)
        vol, _ = na.reconstruct_only(cal_fix, v1, scene, measured, tail, threads=4)
        c = na.volume_correlation(vol, vol_true)
        print(f"{phantom:13s} base={base:.4f}: z {rep.records[0].scan_rmse_z:.4f}->{z:.4f} "
              f"det_errs {np.round(det_err*100,1)}cm corr={c:.4f} ratio={c/base:.3f} "
              f"({time.time()-t0:.0f}s)")
