import numpy as np
import nlos_autocal as na

scene, grid, template = na.desk_scene()

for phantom in ("single_voxel", "hemisphere"):
    vol_true = na.make_phantom(phantom, template)
    measured, cal_est, cal_true = na.scenario(1, grid, vol_true, scene, 0.04, seed=1, threads=4)
    z_err = cal_est.scan_positions[:, 2] - cal_true.scan_positions[:, 2]
    for init in ("true", "plain", "filtered"):
        if init == "true":
            v0 = vol_true
        elif init == "plain":
            v0 = na.initial_volume(cal_est, scene, measured, template, threads=4)
        else:
            v0 = na.initial_volume(cal_est, scene, measured, template,
                                   wavelength=8 * scene.bin_spacing_meters, threads=4)
        b = na.grad_loss(cal_est, v0, scene, measured, threads=4)
        gz = b.d_scan[:, 2]
        restoring = np.sign(gz) == np.sign(z_err)
        print(f"{phantom:13s} init={init:8s} restoring: {restoring.mean()*100:.0f}%  "
              f"det gz={b.d_detect[0, 2]:+.3e} (det z err {cal_est.detection_positions[0,2]-cal_true.detection_positions[0,2]:+.4f})  "
              f"median |gz| {np.median(np.abs(gz)):.2e}")
