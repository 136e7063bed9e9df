import numpy as np
import nlos_autocal as na

scene, grid, template = na.desk_scene()
wl = 8 * scene.bin_spacing_meters
print("wavelength:", wl)

for phantom in ("single_voxel", "hemisphere"):
    vol_true = na.make_phantom(phantom, template)
    measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, 0.04, seed=1, threads=4)
    v_plain = na.initial_volume(cal_est, scene, measured, template, threads=4)
    v_filt = na.initial_volume(cal_est, scene, measured, template, wavelength=wl, threads=4)
    print(f"--- {phantom}: init corr plain={na.volume_correlation(v_plain, vol_true):.3f} "
          f"filtered={na.volume_correlation(v_filt, vol_true):.3f}")
    for label, v0 in (("plain", v_plain), ("filtered", v_filt)):
        cal_fix, volA, rep = na.autocal(cal_est, v0, scene, measured,
                                        na.AutocalSchedule(rng_seed=17),
                                        ground_truth=cal_true, threads=4)
        print(f"{label}: z {rep.records[0].scan_rmse_z:.4f} -> "
              f"{na.scan_rmse(cal_fix, cal_true, (0,0,1)):.4f} "
              f"det z {cal_fix.detection_positions[0,2]-cal_true.detection_positions[0,2]:+.4f}")
