"""Pure-numpy kernels: the import-time fallback when the compiled extension
is unavailable, and the reference the compiled backend is tested against.

All kernels operate on a contiguous chunk of scan positions and leave the
cross-chunk reduction to the caller, so the same code runs serial or inside
a thread pool. Summation order inside a chunk is fixed (scan-major, then
detection, then voxel, then bin) for run-to-run reproducibility.

Shared argument layout (float64 C-contiguous throughout):
  scan_pos (S,3), det_pos (Q,3), src (3,), det (3,), centers (N,3), rho (N,)
  base   -- c * (arrival time of bin 0), meters
  cdt    -- c * bin_width, meters per bin
  nbins  -- K
  sigma_m, inv_sigma2 -- Gaussian width in meters and 1/sigma_m^2
  trunc_bins -- half window in bins; <= 0 means no truncation
  eps    -- degeneracy threshold for wall-to-voxel distances, meters

Degeneracy is reported by raising DegenerateGeometryError with the offending
voxel's flat index.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateGeometryError

NAME = "numpy"


def _check_degenerate(r, eps, what, voxel_offset=0):
    i = int(np.argmin(r))
    if r[i] < eps:
        raise DegenerateGeometryError(
            f"voxel {i + voxel_offset} lies within {eps} m of {what}; falloff term would diverge"
        )


def _pair_geometry(l, s, centers, eps, scan_label, det_label):
    dl = l[None, :] - centers
    r_l = np.sqrt(np.einsum("ij,ij->i", dl, dl))
    _check_degenerate(r_l, eps, scan_label)
    ds = s[None, :] - centers
    r_s = np.sqrt(np.einsum("ij,ij->i", ds, ds))
    _check_degenerate(r_s, eps, det_label)
    return dl, r_l, ds, r_s


def _window(d, base, cdt, nbins, trunc_bins):
    """Bin index window per voxel plus the matching arrival-position grid.

    Returns (ks, valid, u) with shapes (N, W): bin indices, in-range mask and
    the meter-unit offsets  u = bin_position - d_total.
    """
    kc = (d - base) / cdt
    if trunc_bins > 0 and 2 * np.floor(trunc_bins) + 2 < nbins:
        k0 = np.ceil(kc - trunc_bins).astype(np.int64)
        width = int(2 * np.floor(trunc_bins) + 2)
    else:
        k0 = np.zeros(d.shape[0], dtype=np.int64)
        width = nbins
    ks = k0[:, None] + np.arange(width, dtype=np.int64)[None, :]
    valid = (ks >= 0) & (ks < nbins)
    if trunc_bins > 0:
        valid &= np.abs(ks - kc[:, None]) <= trunc_bins
    u = (base + cdt * ks) - d[:, None]
    return ks, valid, u


def forward_chunk(scan_pos, det_pos, src, det, centers, rho, base, cdt, nbins,
                  sigma_m, inv_sigma2, trunc_bins, eps, out):
    """Gaussian-relaxed transient model; fills out[S, Q, K] for this chunk."""
    src_legs = np.linalg.norm(scan_pos - src[None, :], axis=1)
    det_legs = np.linalg.norm(det_pos - det[None, :], axis=1)
    for m in range(det_pos.shape[0]):
        ds = det_pos[m][None, :] - centers
        r_s = np.sqrt(np.einsum("ij,ij->i", ds, ds))
        _check_degenerate(r_s, eps, f"detection point {m}")
        for j in range(scan_pos.shape[0]):
            dl = scan_pos[j][None, :] - centers
            r_l = np.sqrt(np.einsum("ij,ij->i", dl, dl))
            _check_degenerate(r_l, eps, f"scan point {j}")
            d = (r_l + r_s) + (src_legs[j] + det_legs[m])
            w = rho / ((r_l * r_l) * (r_s * r_s))
            ks, valid, u = _window(d, base, cdt, nbins, trunc_bins)
            vals = w[:, None] * np.exp(-(u * u) * inv_sigma2)
            out[j, m, :] += np.bincount(
                ks[valid], weights=vals[valid], minlength=nbins
            )
    return out


def rect_chunk(scan_pos, det_pos, src, det, centers, rho, cdt, nbins, eps, out):
    """Rectangle-window oracle: bin k gets the whole voxel contribution iff
    0 < k - d_total/(c dt) < 1. Literal formula: no offset, no bin centering."""
    src_legs = np.linalg.norm(scan_pos - src[None, :], axis=1)
    det_legs = np.linalg.norm(det_pos - det[None, :], axis=1)
    for m in range(det_pos.shape[0]):
        ds = det_pos[m][None, :] - centers
        r_s = np.sqrt(np.einsum("ij,ij->i", ds, ds))
        _check_degenerate(r_s, eps, f"detection point {m}")
        for j in range(scan_pos.shape[0]):
            dl = scan_pos[j][None, :] - centers
            r_l = np.sqrt(np.einsum("ij,ij->i", dl, dl))
            _check_degenerate(r_l, eps, f"scan point {j}")
            d = (r_l + r_s) + (src_legs[j] + det_legs[m])
            w = rho / ((r_l * r_l) * (r_s * r_s))
            x = d / cdt
            k_hit = np.floor(x).astype(np.int64) + 1
            valid = (x != np.floor(x)) & (k_hit >= 0) & (k_hit < nbins)
            out[j, m, :] += np.bincount(
                k_hit[valid], weights=w[valid], minlength=nbins
            )
    return out


def grad_chunk(scan_pos, det_pos, src, det, centers, rho, measured, base, cdt,
               nbins, sigma_m, inv_sigma2, trunc_bins, eps, need_pos,
               d_rho, d_scan, d_det):
    """Adjoint of the squared-residual loss over this chunk.

    measured is the (S, Q, K) slice matching scan_pos. Accumulates into
    d_rho (N,), d_scan (S, 3), d_det (Q, 3); returns the chunk loss.
    """
    src_legs_v = scan_pos - src[None, :]
    src_legs = np.linalg.norm(src_legs_v, axis=1)
    det_legs_v = det_pos - det[None, :]
    det_legs = np.linalg.norm(det_legs_v, axis=1)
    if need_pos:
        bad = np.where(src_legs < eps)[0]
        if bad.size:
            raise DegenerateGeometryError(
                f"scan point {bad[0]} coincides with the source; position gradient undefined"
            )
        bad = np.where(det_legs < eps)[0]
        if bad.size:
            raise DegenerateGeometryError(
                f"detection point {bad[0]} coincides with the detector; position gradient undefined"
            )
    loss = 0.0
    for m in range(det_pos.shape[0]):
        ds = det_pos[m][None, :] - centers
        r_s = np.sqrt(np.einsum("ij,ij->i", ds, ds))
        _check_degenerate(r_s, eps, f"detection point {m}")
        unit_det = det_legs_v[m] / det_legs[m] if need_pos else None
        for j in range(scan_pos.shape[0]):
            dl = scan_pos[j][None, :] - centers
            r_l = np.sqrt(np.einsum("ij,ij->i", dl, dl))
            _check_degenerate(r_l, eps, f"scan point {j}")
            d = (r_l + r_s) + (src_legs[j] + det_legs[m])
            rl2 = r_l * r_l
            rs2 = r_s * r_s
            f = 1.0 / (rl2 * rs2)
            w = rho * f
            ks, valid, u = _window(d, base, cdt, nbins, trunc_bins)
            g = np.exp(-(u * u) * inv_sigma2)
            g[~valid] = 0.0
            model = np.bincount(
                ks[valid], weights=(w[:, None] * g)[valid], minlength=nbins
            )
            res = model - measured[j, m]
            loss += float(res @ res)
            rk = res[np.clip(ks, 0, nbins - 1)]
            rk = np.where(valid, rk, 0.0)
            gr = g * rk
            s1 = gr.sum(axis=1)
            d_rho += (2.0 * f) * s1
            if need_pos:
                s2 = (gr * u).sum(axis=1)
                coef = (4.0 * inv_sigma2) * rho * f * s2
                unit_src = src_legs_v[j] / src_legs[j]
                grad_l = coef @ (dl / r_l[:, None]) + coef.sum() * unit_src
                grad_l -= (4.0 * rho * s1 / (rl2 * rl2 * rs2)) @ dl
                d_scan[j] += grad_l
                grad_s = coef @ (ds / r_s[:, None]) + coef.sum() * unit_det
                grad_s -= (4.0 * rho * s1 / (rs2 * rs2 * rl2)) @ ds
                d_det[m] += grad_s
    return loss


def backproject_chunk(scan_pos, det_pos, src, det, centers, measured, base,
                      cdt, nbins, eps, rho_acc):
    """Time-gated backprojection with inverse-falloff compensation."""
    src_legs = np.linalg.norm(scan_pos - src[None, :], axis=1)
    det_legs = np.linalg.norm(det_pos - det[None, :], axis=1)
    for m in range(det_pos.shape[0]):
        ds = det_pos[m][None, :] - centers
        r_s = np.sqrt(np.einsum("ij,ij->i", ds, ds))
        _check_degenerate(r_s, eps, f"detection point {m}")
        for j in range(scan_pos.shape[0]):
            dl = scan_pos[j][None, :] - centers
            r_l = np.sqrt(np.einsum("ij,ij->i", dl, dl))
            _check_degenerate(r_l, eps, f"scan point {j}")
            d = (r_l + r_s) + (src_legs[j] + det_legs[m])
            # floor(x + 0.5): same nearest-bin rule as the compiled backend
            k = np.floor((d - base) / cdt + 0.5).astype(np.int64)
            valid = (k >= 0) & (k < nbins)
            vals = measured[j, m][np.clip(k, 0, nbins - 1)] * ((r_l * r_l) * (r_s * r_s))
            rho_acc += np.where(valid, vals, 0.0)
    return rho_acc
