import time

import numpy as np
import nlos_autocal as na

scene, grid, template = na.desk_scene()

for phantom in ("hemisphere", "single_voxel"):
    vol_true = na.make_phantom(phantom, template)
    measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, 0.04, seed=1, threads=4)
    vol0 = na.initial_volume(cal_est, scene, measured, template, threads=4)
    print(f"--- {phantom}")
    for frac, reps in [(0.5, 6), (1.0, 6)]:
        sched = na.AutocalSchedule(total_iterations=reps, rng_seed=17,
                                   scan_subsample_fraction=frac)
        t0 = time.time()
        cal_fix, volA, rep = na.autocal(cal_est, vol0, scene, measured, sched,
                                        ground_truth=cal_true, threads=4)
        zs = [r.scan_rmse_z for r in rep.records]
        print(f"frac={frac} reps={reps}: z {zs[0]:.4f} -> "
              f"{na.scan_rmse(cal_fix, cal_true, (0,0,1)):.4f}"
              f"  det z err {cal_fix.detection_positions[0,2]-cal_true.detection_positions[0,2]:+.4f}"
              f"  ({time.time()-t0:.0f}s)  traj {[f'{v:.3f}' for v in zs[::60]]}")
