import numpy as np
import nlos_autocal as na

# --- forward example: single voxel, left-edge literal convention
c = na.SPEED_OF_LIGHT
# l=s=(0,0,0), i=d=(0,0,1), o=(0,1,0): d_total = 1+1+1+1 = 4
# choose c*dt*k = 4 at k=8 -> c*dt = 0.5
dt = 0.5 / c
scene = na.SceneConfig(source_pos=(0, 0, 1), detector_pos=(0, 0, 1),
                       bin_width=dt, bin_count=16, gaussian_sigma=4 * dt,
                       left_edge_bins=True)
cal = na.CalibrationState(np.zeros((1, 3)), np.zeros((1, 3)))
vol = na.Volume(origin=(-0.5, 0.5, -0.5), voxel_pitch=(1, 1, 1), dims=(1, 1, 1),
                albedo=np.array([1.0]))
print("voxel center:", vol.centers())
for backend in ("compiled", "numpy"):
    out = na.forward_gaussian(cal, vol, scene, truncation=None, backend=backend)
    print(backend, "I[k=8]:", out.data[0, 0, 8], " I[k=6] (2 bins=0.5*sigma_m... )")
    # sigma_m = 4*c*dt = 2.0 m; bin 8 +/- 4 bins -> u = 2.0 = sigma -> e^-1
    print(" e^-1 bin 12:", out.data[0, 0, 12], np.exp(-1))

# parity on a random scene
rng = np.random.default_rng(0)
vol2 = na.Volume(origin=(-0.3, -0.3, 0.5), voxel_pitch=(0.1, 0.12, 0.09), dims=(5, 4, 3),
                 albedo=rng.uniform(0, 1, 60))
scene2 = na.SceneConfig(source_pos=(0.6, 0.1, 0.1), detector_pos=(0.55, -0.1, 0.12),
                        bin_width=80e-12, bin_count=128, gaussian_sigma=160e-12)
cal2 = na.CalibrationState(rng.uniform(-0.4, 0.4, (6, 3)) * [1, 1, 0],
                           np.array([[0.2, 0.0, 0.0]]))
a = na.forward_gaussian(cal2, vol2, scene2, backend="compiled").data
b = na.forward_gaussian(cal2, vol2, scene2, backend="numpy").data
print("parity max rel:", np.max(np.abs(a - b)) / np.max(np.abs(a)))
print("max I:", a.max(), "nonzero bins:", (a > 0).sum())

# rect oracle vs direct
r1 = na.forward_rect_oracle(cal2, vol2, scene2, backend="compiled").data
r2 = na.forward_rect_oracle(cal2, vol2, scene2, backend="numpy").data
print("rect parity:", np.max(np.abs(r1 - r2)))

# --- finite differences on the loss
measured = na.TransientSet(rng.uniform(0, 1e3, a.shape) * (a > 0))
bundle = na.grad_loss(cal2.with_positions(), vol2, scene2, measured, truncation=None)


def loss_at(cal, vol):
    return na.loss(cal, vol, scene2, measured, truncation=None)


# rho FD
h = 1e-5
fd_rho = np.zeros(vol2.voxel_count)
for i in range(vol2.voxel_count):
    p = vol2.albedo.copy(); p[i] += h
    m = vol2.albedo.copy(); m[i] -= h
    fd_rho[i] = (loss_at(cal2, vol2.with_albedo(p)) - loss_at(cal2, vol2.with_albedo(m))) / (2 * h)
scale = np.max(np.abs(fd_rho))
print("d_rho max rel err:", np.max(np.abs(bundle.d_rho - fd_rho)) / scale)

# scan position FD (mask all axes to get full gradient)
cal_all = na.CalibrationState(cal2.scan_positions, cal2.detection_positions, (True, True, True))
bundle = na.grad_loss(cal_all, vol2, scene2, measured, truncation=None)
h = 1e-4
fd_scan = np.zeros((cal2.scan_count, 3))
for j in range(cal2.scan_count):
    for d in range(3):
        p = cal2.scan_positions.copy(); p[j, d] += h
        m = cal2.scan_positions.copy(); m[j, d] -= h
        fd_scan[j, d] = (loss_at(cal_all.with_positions(p), vol2) -
                         loss_at(cal_all.with_positions(m), vol2)) / (2 * h)
print("d_scan max rel err:", np.max(np.abs(bundle.d_scan - fd_scan)) / np.max(np.abs(fd_scan)))

fd_det = np.zeros((1, 3))
for d in range(3):
    p = cal2.detection_positions.copy(); p[0, d] += h
    m = cal2.detection_positions.copy(); m[0, d] -= h
    fd_det[0, d] = (loss_at(cal_all.with_positions(None, p), vol2) -
                    loss_at(cal_all.with_positions(None, m), vol2)) / (2 * h)
print("d_det  max rel err:", np.max(np.abs(bundle.d_detect - fd_det)) / np.max(np.abs(fd_det)))

# grad parity compiled vs numpy
b1 = na.grad_loss(cal_all, vol2, scene2, measured, truncation=None, backend="compiled")
b2 = na.grad_loss(cal_all, vol2, scene2, measured, truncation=None, backend="numpy")
print("grad parity rho:", np.max(np.abs(b1.d_rho - b2.d_rho)) / np.max(np.abs(b1.d_rho)))
print("grad parity scan:", np.max(np.abs(b1.d_scan - b2.d_scan)) / np.max(np.abs(b1.d_scan)))

# threads determinism
g1 = na.grad_loss(cal_all, vol2, scene2, measured, threads=3)
g3 = na.grad_loss(cal_all, vol2, scene2, measured, threads=3)
print("threads=3 repeat identical:", np.array_equal(g1.d_rho, g3.d_rho), np.array_equal(g1.d_scan, g3.d_scan))
g_serial = na.grad_loss(cal_all, vol2, scene2, measured, threads=1)
print("threads 1 vs 3 rel diff:", np.max(np.abs(g1.d_rho - g_serial.d_rho)) / np.max(np.abs(g_serial.d_rho)))
