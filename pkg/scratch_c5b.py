import time

import numpy as np
import nlos_autocal as na

scene, grid, template = na.desk_scene()

warm = na.AutocalSchedule(total_iterations=1, calib_iterations=0,
                          reconstruction_iterations=100,
                          scan_subsample_fraction=0.25,
                          nonnegativity_projection=True,
                          learning_rate=0.05, rng_seed=5)

for phantom in ("hemisphere", "single_voxel"):
    vol_true = na.make_phantom(phantom, template)
    measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, 0.04, seed=1, threads=4)
    vol0 = na.initial_volume(cal_est, scene, measured, template, threads=4)
    print(f"--- {phantom}: init corr {na.volume_correlation(vol0, vol_true):.3f}, "
          f"det z err {cal_est.detection_positions[0,2]-cal_true.detection_positions[0,2]:+.4f}")

    # A: plain autocal, more repeats
    for reps in (4, 10):
        sched = na.AutocalSchedule(total_iterations=reps, rng_seed=17)
        cal_fix, volA, rep = na.autocal(cal_est, vol0, scene, measured, sched,
                                        ground_truth=cal_true, threads=4)
        zs = [r.scan_rmse_z for r in rep.records]
        print(f"A reps={reps}: z {zs[0]:.4f} -> {na.scan_rmse(cal_fix, cal_true, (0,0,1)):.4f}"
              f"  det z err {cal_fix.detection_positions[0,2]-cal_true.detection_positions[0,2]:+.4f}"
              f"  traj {[f'{v:.3f}' for v in zs[::40]]}")

    # B: recon warmup, then autocal
    volw, _ = na.reconstruct_only(cal_est, vol0, scene, measured, warm, threads=4)
    print(f"B warm corr {na.volume_correlation(volw, vol_true):.3f}")
    for reps in (4, 10):
        sched = na.AutocalSchedule(total_iterations=reps, rng_seed=17)
        cal_fix, volB, rep = na.autocal(cal_est, volw, scene, measured, sched,
                                        ground_truth=cal_true, threads=4)
        print(f"B reps={reps}: z -> {na.scan_rmse(cal_fix, cal_true, (0,0,1)):.4f}"
              f"  det z err {cal_fix.detection_positions[0,2]-cal_true.detection_positions[0,2]:+.4f}")
