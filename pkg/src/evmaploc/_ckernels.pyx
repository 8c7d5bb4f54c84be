# cython: language_level=3
"""Compiled kernels. Semantics mirror ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


def tsts(const long long[::1] t, const int[::1] x, const int[::1] y,
         const unsigned char[::1] p, int width, int height, int R,
         double alpha, int r, double beta, bint use_center_ref,
         bint sticky_mask):
    cdef Py_ssize_t n = t.shape[0]
    S_arr = np.zeros((height, width, 2), dtype=np.float64)
    mask_arr = np.ones((height, width), dtype=np.uint8)
    keep_arr = np.zeros(n, dtype=np.uint8)
    cdef double[:, :, ::1] S = S_arr
    cdef unsigned char[:, ::1] mask = mask_arr
    cdef unsigned char[::1] keep = keep_arr
    cdef double area = (2 * r + 1) * (2 * r + 1)
    cdef Py_ssize_t i
    cdef int xi, yi, pi, xx, yy, x0, x1, y0, y1, cnt
    cdef double ti, ref, v
    cdef bint ok
    for i in range(n):
        ti = <double>t[i]
        xi = x[i]
        yi = y[i]
        pi = p[i]
        ref = S[yi, xi, pi] if use_center_ref else ti
        if R > 0:
            y0 = yi - R if yi - R > 0 else 0
            y1 = yi + R if yi + R < height - 1 else height - 1
            x0 = xi - R if xi - R > 0 else 0
            x1 = xi + R if xi + R < width - 1 else width - 1
            for yy in range(y0, y1 + 1):
                for xx in range(x0, x1 + 1):
                    v = S[yy, xx, pi]
                    if v > 0:
                        v = v - (ref - v) / alpha
                        if v < 0:
                            v = 0.0
                        S[yy, xx, pi] = v
        S[yi, xi, pi] = ti
        y0 = yi - r if yi - r > 0 else 0
        y1 = yi + r if yi + r < height - 1 else height - 1
        x0 = xi - r if xi - r > 0 else 0
        x1 = xi + r if xi + r < width - 1 else width - 1
        cnt = 0
        for yy in range(y0, y1 + 1):
            for xx in range(x0, x1 + 1):
                if S[yy, xx, pi] > 0:
                    cnt += 1
        ok = cnt / area >= beta
        keep[i] = ok
        if not ok:
            mask[yi, xi] = 0
        elif not sticky_mask:
            mask[yi, xi] = 1
    return S_arr, mask_arr, keep_arr


def zbuffer(const long long[::1] pix, const double[::1] z,
            const long long[::1] idx, Py_ssize_t n_pixels):
    depth_arr = np.zeros(n_pixels, dtype=np.float64)
    index_arr = np.full(n_pixels, -1, dtype=np.int64)
    cdef double[::1] depth = depth_arr
    cdef long long[::1] index = index_arr
    cdef Py_ssize_t i, k
    for i in range(pix.shape[0]):
        k = pix[i]
        if index[k] < 0 or z[i] < depth[k] or (z[i] == depth[k] and idx[i] < index[k]):
            depth[k] = z[i]
            index[k] = idx[i]
    return depth_arr, index_arr


def ncc_search(const double[:, ::1] src, const double[:, ::1] dst,
               const long long[::1] qx, const long long[::1] qy,
               const long long[::1] init_dx, const long long[::1] init_dy,
               int patch_r, int search_r):
    cdef Py_ssize_t n = qx.shape[0]
    cdef int H = src.shape[0]
    cdef int W = src.shape[1]
    cdef int side = 2 * search_r + 1
    cdef int npix = (2 * patch_r + 1) * (2 * patch_r + 1)
    bdx_arr = np.zeros(n, dtype=np.int64)
    bdy_arr = np.zeros(n, dtype=np.int64)
    best_arr = np.full(n, -np.inf)
    second_arr = np.full(n, -np.inf)
    score_arr = np.empty((side, side), dtype=np.float64)
    cdef long long[::1] bdx = bdx_arr
    cdef long long[::1] bdy = bdy_arr
    cdef double[::1] best = best_arr
    cdef double[::1] second = second_arr
    cdef double[:, ::1] score = score_arr
    cdef Py_ssize_t i
    cdef int cx, cy, ox, oy, dx, dy, u, v, px, py, bx, by
    cdef double ma, mb, a, b, saa, sbb, sab, s, bs, ss
    for i in range(n):
        cx = <int>qx[i]
        cy = <int>qy[i]
        if cx - patch_r < 0 or cy - patch_r < 0 or cx + patch_r >= W or cy + patch_r >= H:
            continue
        ma = 0.0
        for v in range(-patch_r, patch_r + 1):
            for u in range(-patch_r, patch_r + 1):
                ma += src[cy + v, cx + u]
        ma /= npix
        saa = 0.0
        for v in range(-patch_r, patch_r + 1):
            for u in range(-patch_r, patch_r + 1):
                a = src[cy + v, cx + u] - ma
                saa += a * a
        if saa <= 1e-12:
            continue
        ox = cx + <int>init_dx[i]
        oy = cy + <int>init_dy[i]
        bs = -INFINITY
        bx = -1
        by = -1
        for dy in range(side):
            for dx in range(side):
                px = ox + dx - search_r
                py = oy + dy - search_r
                if px - patch_r < 0 or py - patch_r < 0 or px + patch_r >= W or py + patch_r >= H:
                    score[dy, dx] = -INFINITY
                    continue
                mb = 0.0
                for v in range(-patch_r, patch_r + 1):
                    for u in range(-patch_r, patch_r + 1):
                        mb += dst[py + v, px + u]
                mb /= npix
                sbb = 0.0
                sab = 0.0
                for v in range(-patch_r, patch_r + 1):
                    for u in range(-patch_r, patch_r + 1):
                        b = dst[py + v, px + u] - mb
                        sbb += b * b
                        sab += b * (src[cy + v, cx + u] - ma)
                if sbb <= 1e-12:
                    score[dy, dx] = -INFINITY
                    continue
                s = sab / sqrt(saa * sbb)
                score[dy, dx] = s
                if s > bs:
                    bs = s
                    bx = dx
                    by = dy
        if bx < 0:
            continue
        best[i] = bs
        bdx[i] = bx - search_r + init_dx[i]
        bdy[i] = by - search_r + init_dy[i]
        ss = -INFINITY
        for dy in range(side):
            for dx in range(side):
                if abs(dy - by) > 1 or abs(dx - bx) > 1:
                    if score[dy, dx] > ss:
                        ss = score[dy, dx]
        second[i] = ss
    return bdx_arr, bdy_arr, best_arr, second_arr
