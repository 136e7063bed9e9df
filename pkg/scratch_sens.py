import numpy as np
import nlos_autocal as na

scene, grid, template = na.desk_scene(sigma=4 * 50e-12)
tail = na.AutocalSchedule(total_iterations=1, calib_iterations=0,
                          reconstruction_iterations=600,
                          scan_subsample_fraction=0.25,
                          nonnegativity_projection=True,
                          learning_rate=0.05, rng_seed=3)

for phantom in ("hemisphere", "single_voxel"):
    vol_true = na.make_phantom(phantom, template)
    cal_true = grid.calibration()
    measured = na.synthesize(cal_true, vol_true, scene, threads=4)
    wl = 8 * scene.bin_spacing_meters

    print("---", phantom)
    # (a) iid scan z noise at various final levels, detector perfect
    for std in (0.0, 0.01, 0.02, 0.03):
        est = na.perturb(cal_true, na.PerturbationSpec("gaussian_z", std, rng_seed=2))
        est = est.with_positions(None, cal_true.detection_positions)  # detector exact
        v0 = na.initial_volume(est, scene, measured, template, wavelength=wl, threads=4)
        vol, _ = na.reconstruct_only(est, v0, scene, measured, tail, threads=4)
        print(f"scan z std={std*100:.0f}cm det exact: corr={na.volume_correlation(vol, vol_true):.4f}")
    # (b) scans exact, detector z biased
    for dz in (-0.02, -0.05):
        det = cal_true.detection_positions.copy()
        det[0, 2] += dz
        est = cal_true.with_positions(None, det)
        v0 = na.initial_volume(est, scene, measured, template, wavelength=wl, threads=4)
        vol, _ = na.reconstruct_only(est, v0, scene, measured, tail, threads=4)
        print(f"scans exact det dz={dz*100:.0f}cm: corr={na.volume_correlation(vol, vol_true):.4f}")
