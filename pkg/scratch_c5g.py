import numpy as np
import nlos_autocal as na

for sig_mult, det_pos in [(4, (0.45, 0.0, 0.0)), (4, (0.5, -0.5, 0.0))]:
    scene, grid, template = na.desk_scene(sigma=sig_mult * 50e-12)
    grid = na.ScanGrid(nx=grid.nx, ny=grid.ny, width=grid.width, height=grid.height,
                       detection_positions=(det_pos,))
    print(f"=== sigma={sig_mult}dt det={det_pos}")
    for phantom in ("single_voxel", "hemisphere"):
        vol_true = na.make_phantom(phantom, template)
        measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, 0.04, seed=1, threads=4)

        # upper bound: calib-only from truth
        sched = na.AutocalSchedule(total_iterations=1, calib_iterations=160,
                                   reconstruction_iterations=0, rng_seed=17)
        cal_fix, _, rep = na.autocal(cal_est, vol_true, scene, measured, sched,
                                     ground_truth=cal_true, threads=4)
        print(f"{phantom:13s} true-vol: z {rep.records[0].scan_rmse_z:.4f} -> "
              f"{na.scan_rmse(cal_fix, cal_true, (0,0,1)):.4f} "
              f"det {cal_fix.detection_positions[0,2]-cal_true.detection_positions[0,2]:+.4f}")

        # annealed lr from truth: does the floor drop?
        cal_cur, vol_cur = cal_est, vol_true
        for lr, reps in [(0.01, 4), (0.003, 2), (0.001, 2)]:
            sched = na.AutocalSchedule(total_iterations=reps, calib_iterations=20,
                                       reconstruction_iterations=0, rng_seed=17,
                                       learning_rate=lr)
            cal_cur, _, _ = na.autocal(cal_cur, vol_true, scene, measured, sched,
                                       threads=4)
        print(f"{phantom:13s} true-vol annealed: -> "
              f"{na.scan_rmse(cal_cur, cal_true, (0,0,1)):.4f} "
              f"det {cal_cur.detection_positions[0,2]-cal_true.detection_positions[0,2]:+.4f}")
