import time

import numpy as np
import nlos_autocal as na

scene, grid, template = na.desk_scene()

for phantom in ("single_voxel", "hemisphere"):
    vol_true = na.make_phantom(phantom, template)
    measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, 0.0, seed=1, threads=4)
    vol0 = na.initial_volume(cal_est, scene, measured, template, threads=4)
    print(f"--- {phantom}: corr(init)={na.volume_correlation(vol0, vol_true):.4f}")
    for lr, iters, frac, proj in [(0.01, 400, 0.25, True), (0.02, 400, 0.25, True),
                                  (0.05, 400, 0.25, True), (0.02, 400, 0.25, False),
                                  (0.05, 800, 0.25, True)]:
        sched = na.AutocalSchedule(total_iterations=1, calib_iterations=0,
                                   reconstruction_iterations=iters,
                                   scan_subsample_fraction=frac,
                                   nonnegativity_projection=proj,
                                   learning_rate=lr, rng_seed=3)
        t0 = time.time()
        vol, report = na.reconstruct_only(cal_est, vol0, scene, measured, sched, threads=4)
        print(f"lr={lr} iters={iters} frac={frac} proj={proj}: "
              f"corr={na.volume_correlation(vol, vol_true):.4f} "
              f"loss={report.records[-1].loss:.3g} ({time.time()-t0:.1f}s)")
