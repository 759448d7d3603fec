"""Numba kernels for the rasterizer hot loops and separable filtering.

The rasterizer processes one 16x16 pixel tile at a time with the tile's
transmittance and color state held in small local buffers; primitives
iterate in ascending index order in the outer loop, so each pixel observes
exactly the sequential compositing the model prescribes while the inner
pixel loops stay contiguous.

All kernels are deterministic for any thread count: parallel loops own
disjoint tiles, and gradient accumulation goes into fixed per-tile-block
buffers that the caller merges in a fixed order.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

T_EPS = 1e-4    # transmittance early-termination threshold
TILE_PX = 16    # rasterizer screen-tile side in pixels


@njit(cache=True)
def build_tile_lists(tr0, tr1, tc0, tc1, n_tx, n_ty):
    """CSR lists of primitive indices per screen tile, ascending per tile.

    A primitive with tr0 < 0 is culled. Returns (offsets, lists) with
    offsets of length n_tx*n_ty + 1.
    """
    n_tiles = n_tx * n_ty
    offsets = np.zeros(n_tiles + 1, np.int64)
    n = tr0.shape[0]
    for i in range(n):
        if tr0[i] < 0:
            continue
        for tr in range(tr0[i], tr1[i] + 1):
            base = tr * n_tx
            for tc in range(tc0[i], tc1[i] + 1):
                offsets[base + tc + 1] += 1
    for t in range(n_tiles):
        offsets[t + 1] += offsets[t]
    lists = np.empty(offsets[n_tiles], np.int64)
    cursor = offsets[:-1].copy()
    for i in range(n):
        if tr0[i] < 0:
            continue
        for tr in range(tr0[i], tr1[i] + 1):
            base = tr * n_tx
            for tc in range(tc0[i], tc1[i] + 1):
                t = base + tc
                lists[cursor[t]] = i
                cursor[t] += 1
    return offsets, lists


@njit(cache=True, parallel=True)
def rasterize_forward(
    mx, my, u, v, cth, sth, colors, px_c0, px_c1, px_r0, px_r1,
    offsets, lists, n_tx, n_ty, height, width, blend,
    tiles_per_block, n_blocks,
):
    """Composite primitives per pixel in ascending index order.

    px_* are each primitive's covered pixel ranges (inclusive); per pixel a
    primitive contributes iff the pixel lies in that box and, in blend mode,
    the running transmittance is still at least T_EPS. Returns the pre-clamp
    composite, final transmittances, and per-pixel visit counts.
    """
    # every pixel belongs to exactly one tile and every tile writes all its
    # pixels back, so the outputs need no initialization
    contrib = np.empty((height, width, 3))
    t_final = np.empty((height, width))
    visits = np.empty((height, width), np.int32)
    n_tiles = n_tx * n_ty
    for block in prange(n_blocks):
        t_loc = np.empty(TILE_PX * TILE_PX)
        acc = np.empty(TILE_PX * TILE_PX * 3)
        nv = np.empty(TILE_PX * TILE_PX, np.int32)
        tile_lo = block * tiles_per_block
        tile_hi = min(n_tiles, tile_lo + tiles_per_block)
        for tile in range(tile_lo, tile_hi):
            ty = tile // n_tx
            tx = tile - ty * n_tx
            row0 = ty * TILE_PX
            col0 = tx * TILE_PX
            th = min(TILE_PX, height - row0)
            tw = min(TILE_PX, width - col0)
            t_loc[:] = 1.0
            acc[:] = 0.0
            nv[:] = 0
            alive = th * tw
            for k in range(offsets[tile], offsets[tile + 1]):
                if blend and alive == 0:
                    # every pixel in the tile is terminated; later
                    # primitives cannot contribute anywhere in it
                    break
                i = lists[k]
                r_lo = max(px_r0[i] - row0, 0)
                r_hi = min(px_r1[i] - row0, th - 1)
                c_lo = max(px_c0[i] - col0, 0)
                c_hi = min(px_c1[i] - col0, tw - 1)
                cr = colors[i, 0]
                cg = colors[i, 1]
                cb = colors[i, 2]
                for rr in range(r_lo, r_hi + 1):
                    dy = row0 + rr + 0.5 - my[i]
                    a = cth[i] * dy  # reused below: ey = -sth*dx + cth*dy
                    b = sth[i] * dy  # ex = cth*dx + sth*dy
                    base = rr * TILE_PX
                    for cc in range(c_lo, c_hi + 1):
                        idx = base + cc
                        T = t_loc[idx]
                        if blend and T < T_EPS:
                            continue
                        dx = col0 + cc + 0.5 - mx[i]
                        ex = cth[i] * dx + b
                        ey = a - sth[i] * dx
                        q = ex * ex * u[i] + ey * ey * v[i]
                        g = np.exp(-0.5 * q)
                        nv[idx] += 1
                        if blend:
                            w = g * T
                            acc[idx * 3] += cr * w
                            acc[idx * 3 + 1] += cg * w
                            acc[idx * 3 + 2] += cb * w
                            t_new = T * (1.0 - g)
                            t_loc[idx] = t_new
                            if t_new < T_EPS:
                                alive -= 1
                        else:
                            acc[idx * 3] += cr * g
                            acc[idx * 3 + 1] += cg * g
                            acc[idx * 3 + 2] += cb * g
            for rr in range(th):
                base = rr * TILE_PX
                for cc in range(tw):
                    idx = base + cc
                    contrib[row0 + rr, col0 + cc, 0] = acc[idx * 3]
                    contrib[row0 + rr, col0 + cc, 1] = acc[idx * 3 + 1]
                    contrib[row0 + rr, col0 + cc, 2] = acc[idx * 3 + 2]
                    t_final[row0 + rr, col0 + cc] = t_loc[idx]
                    visits[row0 + rr, col0 + cc] = nv[idx]
    return contrib, t_final, visits


@njit(cache=True, parallel=True)
def rasterize_backward(
    mx, my, u, v, cth, sth, colors, px_c0, px_c1, px_r0, px_r1,
    offsets, lists, n_tx, n_ty, height, width, blend,
    contrib, grad_img, tiles_per_block, n_blocks, n_prims,
):
    """Accumulate loss gradients for every (pixel, primitive) pair the
    forward pass visited.

    Replays each tile's compositing; the suffix color needed for the
    transmittance chain comes from subtracting the running prefix from the
    stored composite, which reproduces the forward sums bitwise and avoids
    dividing by (1 - G) when a primitive saturates a pixel.

    Gradient slots per primitive: (mean_x, mean_y, log_s_x, log_s_y, theta,
    r, g, b). Accumulation is per fixed tile-block, merged by the caller.
    """
    grads = np.zeros((n_blocks, n_prims, 8))
    visits = np.empty((height, width), np.int32)
    n_tiles = n_tx * n_ty
    for block in prange(n_blocks):
        t_loc = np.empty(TILE_PX * TILE_PX)
        pre = np.empty(TILE_PX * TILE_PX * 3)
        nv = np.empty(TILE_PX * TILE_PX, np.int32)
        tile_lo = block * tiles_per_block
        tile_hi = min(n_tiles, tile_lo + tiles_per_block)
        for tile in range(tile_lo, tile_hi):
            ty = tile // n_tx
            tx = tile - ty * n_tx
            row0 = ty * TILE_PX
            col0 = tx * TILE_PX
            th = min(TILE_PX, height - row0)
            tw = min(TILE_PX, width - col0)
            t_loc[:] = 1.0
            pre[:] = 0.0
            nv[:] = 0
            alive = th * tw
            for k in range(offsets[tile], offsets[tile + 1]):
                if blend and alive == 0:
                    break
                i = lists[k]
                r_lo = max(px_r0[i] - row0, 0)
                r_hi = min(px_r1[i] - row0, th - 1)
                c_lo = max(px_c0[i] - col0, 0)
                c_hi = min(px_c1[i] - col0, tw - 1)
                cr = colors[i, 0]
                cg = colors[i, 1]
                cb = colors[i, 2]
                d_mx = 0.0
                d_my = 0.0
                d_lsx = 0.0
                d_lsy = 0.0
                d_th = 0.0
                d_cr = 0.0
                d_cg = 0.0
                d_cb = 0.0
                for rr in range(r_lo, r_hi + 1):
                    row = row0 + rr
                    dy = row + 0.5 - my[i]
                    a = cth[i] * dy
                    b = sth[i] * dy
                    base = rr * TILE_PX
                    for cc in range(c_lo, c_hi + 1):
                        idx = base + cc
                        T = t_loc[idx]
                        if blend and T < T_EPS:
                            continue
                        col = col0 + cc
                        dx = col + 0.5 - mx[i]
                        ex = cth[i] * dx + b
                        ey = a - sth[i] * dx
                        q = ex * ex * u[i] + ey * ey * v[i]
                        g = np.exp(-0.5 * q)
                        nv[idx] += 1
                        g_r = grad_img[row, col, 0]
                        g_g = grad_img[row, col, 1]
                        g_b = grad_img[row, col, 2]
                        if blend:
                            w = g * T
                            con_r = cr * w
                            con_g = cg * w
                            con_b = cb * w
                            denom = 1.0 - g
                            if denom > 0.0:
                                inv_denom = 1.0 / denom
                                s_r = contrib[row, col, 0] - pre[idx * 3] - con_r
                                s_g = contrib[row, col, 1] - pre[idx * 3 + 1] - con_g
                                s_b = contrib[row, col, 2] - pre[idx * 3 + 2] - con_b
                                term_r = cr * T - s_r * inv_denom
                                term_g = cg * T - s_g * inv_denom
                                term_b = cb * T - s_b * inv_denom
                            else:
                                term_r = cr * T
                                term_g = cg * T
                                term_b = cb * T
                            dl_dg = g_r * term_r + g_g * term_g + g_b * term_b
                            d_cr += g_r * w
                            d_cg += g_g * w
                            d_cb += g_b * w
                            pre[idx * 3] += con_r
                            pre[idx * 3 + 1] += con_g
                            pre[idx * 3 + 2] += con_b
                            t_new = T * denom
                            t_loc[idx] = t_new
                            if t_new < T_EPS:
                                alive -= 1
                        else:
                            dl_dg = g_r * cr + g_g * cg + g_b * cb
                            d_cr += g_r * g
                            d_cg += g_g * g
                            d_cb += g_b * g
                        dl_dq = -0.5 * g * dl_dg
                        d_ex = 2.0 * ex * u[i] * dl_dq
                        d_ey = 2.0 * ey * v[i] * dl_dq
                        d_mx -= cth[i] * d_ex - sth[i] * d_ey
                        d_my -= sth[i] * d_ex + cth[i] * d_ey
                        d_lsx += dl_dq * (-2.0 * ex * ex * u[i])
                        d_lsy += dl_dq * (-2.0 * ey * ey * v[i])
                        d_th += dl_dq * (2.0 * ex * ey * (u[i] - v[i]))
                grads[block, i, 0] += d_mx
                grads[block, i, 1] += d_my
                grads[block, i, 2] += d_lsx
                grads[block, i, 3] += d_lsy
                grads[block, i, 4] += d_th
                grads[block, i, 5] += d_cr
                grads[block, i, 6] += d_cg
                grads[block, i, 7] += d_cb
            for rr in range(th):
                base = rr * TILE_PX
                for cc in range(tw):
                    visits[row0 + rr, col0 + cc] = nv[base + cc]
    return grads, visits


@njit(cache=True)
def ssim_partials(mu_x, mu_y, x2f, xyf, sig_y, c1, c2, ds_dmu, ds_dx2f, ds_dxyf):
    """Per-pixel SSIM sum and its partials w.r.t. the x-side filtered maps.

    One fused pass to avoid a dozen full-image numpy temporaries in the
    training loop. Writes dS/d mu_x, dS/d W*(x^2), dS/d W*(x*y) into the
    provided buffers and returns the sum of S over the valid grid.
    """
    hv, wv = mu_x.shape
    s_sum = 0.0
    for i in range(hv):
        for j in range(wv):
            m_x = mu_x[i, j]
            m_y = mu_y[i, j]
            sig_x = x2f[i, j] - m_x * m_x
            sig_xy = xyf[i, j] - m_x * m_y
            a1 = 2.0 * m_x * m_y + c1
            a2 = 2.0 * sig_xy + c2
            b1 = m_x * m_x + m_y * m_y + c1
            b2 = sig_x + sig_y[i, j] + c2
            inv_d = 1.0 / (b1 * b2)
            s = a1 * a2 * inv_d
            s_sum += s
            # 1/b2 - 1/b1 == (b1 - b2) * inv_d, so one division serves all
            ds_dmu[i, j] = (2.0 * m_y * (a2 - a1) + 2.0 * m_x * a1 * a2 * (b1 - b2) * inv_d) * inv_d
            ds_dx2f[i, j] = -s * b1 * inv_d
            ds_dxyf[i, j] = 2.0 * a1 * inv_d
    return s_sum


@njit(cache=True)
def filter_valid_into(a, kernel, tmp, out):
    """Separable valid-mode correlation into caller-owned buffers.

    tmp must be (a.height, out.width); out is (a.height - n + 1,
    a.width - n + 1) for an n-tap kernel.
    """
    h, w = a.shape
    n = kernel.shape[0]
    wv = w - n + 1
    hv = h - n + 1
    for y in range(h):
        for x in range(wv):
            tmp[y, x] = kernel[0] * a[y, x]
        for i in range(1, n):
            ki = kernel[i]
            for x in range(wv):
                tmp[y, x] += ki * a[y, x + i]
    for y in range(hv):
        for x in range(wv):
            out[y, x] = kernel[0] * tmp[y, x]
        for i in range(1, n):
            ki = kernel[i]
            for x in range(wv):
                out[y, x] += ki * tmp[y + i, x]


def filter_valid(a, kernel):
    """Allocating wrapper around filter_valid_into."""
    h, w = a.shape
    n = kernel.shape[0]
    tmp = np.empty((h, w - n + 1))
    out = np.empty((h - n + 1, w - n + 1))
    filter_valid_into(a, kernel, tmp, out)
    return out


@njit(cache=True)
def combine_loss_grad(x, y, f1, f2, f3, l1_coef, ss_coef, grad_out):
    """Assemble one channel of the composite-loss image gradient.

    grad = l1_coef * sign(x - y) - ss_coef * (f1 + 2 x f2 + y f3);
    returns sum |x - y| for the L1 term of the loss.
    """
    h, w = x.shape
    abs_sum = 0.0
    for i in range(h):
        for j in range(w):
            d = x[i, j] - y[i, j]
            if d > 0.0:
                abs_sum += d
                sgn = 1.0
            elif d < 0.0:
                abs_sum -= d
                sgn = -1.0
            else:
                sgn = 0.0
            grad_out[i, j] = l1_coef * sgn - ss_coef * (
                f1[i, j] + 2.0 * x[i, j] * f2[i, j] + y[i, j] * f3[i, j]
            )
    return abs_sum
