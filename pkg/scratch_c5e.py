import time

import numpy as np
import nlos_autocal as na

scene, grid, template = na.desk_scene(sigma=4 * 50e-12)  # sigma_m ~ 6 cm
print("sigma_m:", scene.sigma_meters)
tail = na.AutocalSchedule(total_iterations=1, calib_iterations=0,
                          reconstruction_iterations=400,
                          scan_subsample_fraction=0.25,
                          nonnegativity_projection=True,
                          learning_rate=0.05, rng_seed=3)

for phantom in ("single_voxel", "hemisphere"):
    vol_true = na.make_phantom(phantom, template)
    print("---", phantom)
    base = {}
    for std in (0.0, 0.04):
        measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, std, seed=1, threads=4)
        vol0 = na.initial_volume(cal_est, scene, measured, template, threads=4)
        vol, _ = na.reconstruct_only(cal_est, vol0, scene, measured, tail, threads=4)
        base[std] = na.volume_correlation(vol, vol_true)
        print(f"recon-only std={std}: corr={base[std]:.4f}")
    measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, 0.04, seed=1, threads=4)
    vol0 = na.initial_volume(cal_est, scene, measured, template, threads=4)
    cal_fix, _, rep = na.autocal(cal_est, vol0, scene, measured,
                                 na.AutocalSchedule(rng_seed=17), ground_truth=cal_true,
                                 threads=4)
    print(f"autocal z {rep.records[0].scan_rmse_z:.4f} -> "
          f"{na.scan_rmse(cal_fix, cal_true, (0,0,1)):.4f} "
          f"det z {cal_fix.detection_positions[0,2]-cal_true.detection_positions[0,2]:+.4f}")
    vol1 = na.initial_volume(cal_fix, scene, measured, template, threads=4)
    vol, _ = na.reconstruct_only(cal_fix, vol1, scene, measured, tail, threads=4)
    c = na.volume_correlation(vol, vol_true)
    print(f"autocal+recon: corr={c:.4f} ratio={c/base[0.0]:.3f}")
