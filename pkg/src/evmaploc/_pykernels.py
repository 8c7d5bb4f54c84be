"""Pure-Python/numpy kernels. Reference semantics for ``_ckernels.pyx``."""
import numpy as np


def tsts(t, x, y, p, width, height, R, alpha, r, beta, use_center_ref, sticky_mask):
    S = np.zeros((height, width, 2), dtype=np.float64)
    mask = np.ones((height, width), dtype=np.uint8)
    keep = np.zeros(len(t), dtype=np.uint8)
    area = float((2 * r + 1) ** 2)
    for i in range(len(t)):
        ti = float(t[i])
        xi, yi, pi = int(x[i]), int(y[i]), int(p[i])
        ref = S[yi, xi, pi] if use_center_ref else ti
        if R > 0:
            win = S[max(yi - R, 0):yi + R + 1, max(xi - R, 0):xi + R + 1, pi]
            live = win > 0
            win[live] -= (ref - win[live]) / alpha
            win[live & (win < 0)] = 0.0
        S[yi, xi, pi] = ti
        cnt = np.count_nonzero(S[max(yi - r, 0):yi + r + 1, max(xi - r, 0):xi + r + 1, pi] > 0)
        ok = cnt / area >= beta
        keep[i] = ok
        if not ok:
            mask[yi, xi] = 0
        elif not sticky_mask:
            mask[yi, xi] = 1
    return S, mask, keep


def zbuffer(pix, z, idx, n_pixels):
    depth = np.zeros(n_pixels, dtype=np.float64)
    index = np.full(n_pixels, -1, dtype=np.int64)
    if len(pix) == 0:
        return depth, index
    order = np.lexsort((idx, z, pix))
    sp = pix[order]
    first = np.ones(len(sp), dtype=bool)
    first[1:] = sp[1:] != sp[:-1]
    win = order[first]
    depth[pix[win]] = z[win]
    index[pix[win]] = idx[win]
    return depth, index


def ncc_search(src, dst, qx, qy, init_dx, init_dy, patch_r, search_r):
    from numpy.lib.stride_tricks import sliding_window_view

    n = len(qx)
    H, W = src.shape
    best_dx = np.zeros(n, dtype=np.int64)
    best_dy = np.zeros(n, dtype=np.int64)
    best = np.full(n, -np.inf)
    second = np.full(n, -np.inf)
    side = 2 * search_r + 1
    for i in range(n):
        cx, cy = int(qx[i]), int(qy[i])
        if cx - patch_r < 0 or cy - patch_r < 0 or cx + patch_r >= W or cy + patch_r >= H:
            continue
        a = src[cy - patch_r:cy + patch_r + 1, cx - patch_r:cx + patch_r + 1]
        a = a - a.mean()
        saa = float((a * a).sum())
        if saa <= 1e-12:
            continue
        ox, oy = cx + int(init_dx[i]), cy + int(init_dy[i])
        # candidate windows are centred at (ox+dx, oy+dy); pad so out-of-image
        # candidates can be recognised and rejected
        pad = search_r + patch_r
        x0, y0 = ox - pad, oy - pad
        region = np.full((2 * pad + 1, 2 * pad + 1), np.nan)
        sx0, sy0 = max(x0, 0), max(y0, 0)
        sx1, sy1 = min(x0 + 2 * pad + 1, W), min(y0 + 2 * pad + 1, H)
        if sx1 > sx0 and sy1 > sy0:
            region[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = dst[sy0:sy1, sx0:sx1]
        wins = sliding_window_view(region, (2 * patch_r + 1, 2 * patch_r + 1))
        assert wins.shape[:2] == (side, side)
        b = wins - wins.mean(axis=(2, 3), keepdims=True)
        sbb = (b * b).sum(axis=(2, 3))
        sab = (b * a).sum(axis=(2, 3))
        with np.errstate(invalid="ignore", divide="ignore"):
            score = sab / np.sqrt(saa * sbb)
        score[~np.isfinite(score) | (sbb <= 1e-12)] = -np.inf
        k = int(np.argmax(score))
        by, bx = divmod(k, side)
        if not np.isfinite(score[by, bx]):
            continue
        best[i] = score[by, bx]
        best_dx[i] = bx - search_r + int(init_dx[i])
        best_dy[i] = by - search_r + int(init_dy[i])
        yy, xx = np.mgrid[0:side, 0:side]
        far = np.maximum(np.abs(yy - by), np.abs(xx - bx)) > 1
        if far.any():
            second[i] = score[far].max()
    return best_dx, best_dy, best, second
