"""JIT rasterization kernels.

Pixel samples sit at (x + 0.5, y + 0.5) with y down. Triangles are
canonicalized to positive signed area; edge ties resolve by the top-left rule
(top = horizontal right-going edge, left = upward edge), so triangles sharing
an edge cover every sample exactly once. fastmath stays off: identical inputs
must produce byte-identical framebuffers.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _orient(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


@njit(cache=True)
def _top_left(ax, ay, bx, by):
    return (ay == by and bx > ax) or (by < ay)


@njit(cache=True)
def fill_triangles(
    sxy,      # (n, 3, 2) screen coords
    depth01,  # (n, 3) screen-affine depth in [0, 1]
    inv_w,    # (n, 3) 1 / clip w
    n_over_w, # (n, 3, 3) view-space normal / w
    p_over_w, # (n, 3, 3) view-space position / w
    uv_over_w,# (n, 3, 2) texcoords / w
    color4,   # rgba in [0, 1]
    mode,     # 0 flat, 1 lambert
    textured, # 0 / 1
    color,    # (h, w, 4) uint8 output
    depth,    # (h, w) float64 output
):
    h, w = depth.shape
    base_r = color4[0]
    base_g = color4[1]
    base_b = color4[2]
    base_a = min(max(color4[3], 0.0), 1.0)
    a8 = np.uint8(int(base_a * 255.0 + 0.5))
    for t in range(sxy.shape[0]):
        x0 = sxy[t, 0, 0]
        y0 = sxy[t, 0, 1]
        x1 = sxy[t, 1, 0]
        y1 = sxy[t, 1, 1]
        x2 = sxy[t, 2, 0]
        y2 = sxy[t, 2, 1]
        i1 = 1
        i2 = 2
        area = _orient(x0, y0, x1, y1, x2, y2)
        if area == 0.0:
            continue
        if area < 0.0:  # canonicalize winding; culling is off
            x1, x2 = x2, x1
            y1, y2 = y2, y1
            i1, i2 = 2, 1
            area = -area

        minx = int(max(min(x0, min(x1, x2)), 0.0))
        maxx = int(min(max(x0, max(x1, x2)) + 1.0, w))
        miny = int(max(min(y0, min(y1, y2)), 0.0))
        maxy = int(min(max(y0, max(y1, y2)) + 1.0, h))
        if minx >= maxx or miny >= maxy:
            continue

        tl0 = _top_left(x1, y1, x2, y2)
        tl1 = _top_left(x2, y2, x0, y0)
        tl2 = _top_left(x0, y0, x1, y1)

        d0 = depth01[t, 0]
        d1 = depth01[t, i1]
        d2 = depth01[t, i2]
        iw0 = inv_w[t, 0]
        iw1 = inv_w[t, i1]
        iw2 = inv_w[t, i2]

        for py in range(miny, maxy):
            sy = py + 0.5
            for px in range(minx, maxx):
                sx = px + 0.5
                w0 = _orient(x1, y1, x2, y2, sx, sy)
                w1 = _orient(x2, y2, x0, y0, sx, sy)
                w2 = _orient(x0, y0, x1, y1, sx, sy)
                if not ((w0 > 0.0 or (w0 == 0.0 and tl0))
                        and (w1 > 0.0 or (w1 == 0.0 and tl1))
                        and (w2 > 0.0 or (w2 == 0.0 and tl2))):
                    continue
                l0 = w0 / area
                l1 = w1 / area
                l2 = w2 / area
                d = l0 * d0 + l1 * d1 + l2 * d2
                if d >= depth[py, px]:
                    continue
                depth[py, px] = d

                r = base_r
                g = base_g
                b = base_b
                if mode == 1 or textured == 1:
                    iw = l0 * iw0 + l1 * iw1 + l2 * iw2
                    if mode == 1:
                        nx = (l0 * n_over_w[t, 0, 0] + l1 * n_over_w[t, i1, 0] + l2 * n_over_w[t, i2, 0]) / iw
                        ny = (l0 * n_over_w[t, 0, 1] + l1 * n_over_w[t, i1, 1] + l2 * n_over_w[t, i2, 1]) / iw
                        nz = (l0 * n_over_w[t, 0, 2] + l1 * n_over_w[t, i1, 2] + l2 * n_over_w[t, i2, 2]) / iw
                        vx = (l0 * p_over_w[t, 0, 0] + l1 * p_over_w[t, i1, 0] + l2 * p_over_w[t, i2, 0]) / iw
                        vy = (l0 * p_over_w[t, 0, 1] + l1 * p_over_w[t, i1, 1] + l2 * p_over_w[t, i2, 1]) / iw
                        vz = (l0 * p_over_w[t, 0, 2] + l1 * p_over_w[t, i1, 2] + l2 * p_over_w[t, i2, 2]) / iw
                        nl = np.sqrt(nx * nx + ny * ny + nz * nz)
                        vl = np.sqrt(vx * vx + vy * vy + vz * vz)
                        lam = 0.0
                        if nl > 0.0 and vl > 0.0:
                            # headlight at the eye: light dir = -view pos
                            lam = -(nx * vx + ny * vy + nz * vz) / (nl * vl)
                        if lam < 0.0:
                            lam = 0.0
                        r *= lam
                        g *= lam
                        b *= lam
                    if textured == 1:
                        u = (l0 * uv_over_w[t, 0, 0] + l1 * uv_over_w[t, i1, 0] + l2 * uv_over_w[t, i2, 0]) / iw
                        v = (l0 * uv_over_w[t, 0, 1] + l1 * uv_over_w[t, i1, 1] + l2 * uv_over_w[t, i2, 1]) / iw
                        u -= np.floor(u)
                        v -= np.floor(v)
                        cell = int(u * 8.0) + int(v * 8.0)
                        if cell % 2 == 1:
                            r *= 0.5
                            g *= 0.5
                            b *= 0.5

                color[py, px, 0] = np.uint8(int(min(max(r, 0.0), 1.0) * 255.0 + 0.5))
                color[py, px, 1] = np.uint8(int(min(max(g, 0.0), 1.0) * 255.0 + 0.5))
                color[py, px, 2] = np.uint8(int(min(max(b, 0.0), 1.0) * 255.0 + 0.5))
                color[py, px, 3] = a8


@njit(cache=True)
def resample_radial(src, dst, k1, k2, bg_r, bg_g, bg_b, bg_a):
    """Inverse-mapping barrel distortion with bilinear filtering.

    Destination radius r (unit: half of min(w, h), center origin) samples the
    source at r * (1 + k1 r^2 + k2 r^4); samples outside the source grid
    return the background color.
    """
    h, w = dst.shape[0], dst.shape[1]
    cx = w * 0.5
    cy = h * 0.5
    unit = (w if w < h else h) * 0.5
    for py in range(h):
        ny = (py + 0.5 - cy) / unit
        for px in range(w):
            nx = (px + 0.5 - cx) / unit
            r2 = nx * nx + ny * ny
            s = 1.0 + k1 * r2 + k2 * r2 * r2
            fx = cx + nx * s * unit - 0.5
            fy = cy + ny * s * unit - 0.5
            if fx < 0.0 or fy < 0.0 or fx > w - 1.0 or fy > h - 1.0:
                dst[py, px, 0] = bg_r
                dst[py, px, 1] = bg_g
                dst[py, px, 2] = bg_b
                dst[py, px, 3] = bg_a
                continue
            x0 = int(np.floor(fx))
            y0 = int(np.floor(fy))
            x1 = x0 + 1 if x0 + 1 < w else x0
            y1 = y0 + 1 if y0 + 1 < h else y0
            tx = fx - x0
            ty = fy - y0
            for c in range(4):
                v00 = np.float64(src[y0, x0, c])
                v01 = np.float64(src[y0, x1, c])
                v10 = np.float64(src[y1, x0, c])
                v11 = np.float64(src[y1, x1, c])
                top = v00 + (v01 - v00) * tx
                bot = v10 + (v11 - v10) * tx
                dst[py, px, c] = np.uint8(int(top + (bot - top) * ty + 0.5))
