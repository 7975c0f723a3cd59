"""Slow scalar reference implementations used only by the tests.

Written from the definitions with explicit loops; they share no code with
the package.
"""
import math


def catmull_rom(t):
    t = abs(t)
    if t <= 1.0:
        return 1.5 * t ** 3 - 2.5 * t ** 2 + 1.0
    if t < 2.0:
        return -0.5 * t ** 3 + 2.5 * t ** 2 - 4.0 * t + 2.0
    return 0.0


def resize_1d(signal, n_out, antialias=True):
    n_in = len(signal)
    scale = n_in / n_out
    stretch = scale if (antialias and scale > 1) else 1.0
    out = []
    for i in range(n_out):
        centre = (i + 0.5) * scale - 0.5
        acc = wsum = 0.0
        lo = math.floor(centre - 2 * stretch) - 1
        hi = math.ceil(centre + 2 * stretch) + 1
        for j in range(lo, hi + 1):
            w = catmull_rom((centre - j) / stretch)
            if w == 0.0:
                continue
            acc += w * signal[min(max(j, 0), n_in - 1)]
            wsum += w
        out.append(acc / wsum if stretch != 1.0 else acc)
    return out


def resize_plane(plane, new_w, new_h, antialias=True):
    rows = [resize_1d(list(r), new_w, antialias) for r in plane]
    cols = [resize_1d([rows[y][x] for y in range(len(rows))], new_h, antialias) for x in range(new_w)]
    return [[cols[x][y] for x in range(new_w)] for y in range(new_h)]


def conv_same(planes, weights, bias, relu=False):
    """planes[i][y][x], weights[o][i][dy][dx]; replicate padding."""
    cin, h, w = len(planes), len(planes[0]), len(planes[0][0])
    cout, kh, kw = len(weights), len(weights[0][0]), len(weights[0][0][0])
    out = []
    for o in range(cout):
        plane = []
        for y in range(h):
            row = []
            for x in range(w):
                acc = bias[o]
                for i in range(cin):
                    for dy in range(kh):
                        for dx in range(kw):
                            yy = min(max(y + dy - kh // 2, 0), h - 1)
                            xx = min(max(x + dx - kw // 2, 0), w - 1)
                            acc += weights[o][i][dy][dx] * planes[i][yy][xx]
                row.append(max(acc, 0.0) if relu else acc)
            plane.append(row)
        out.append(plane)
    return out


def chi2(x, y):
    total = 0.0
    for a, b in zip(x, y):
        if a + b != 0:
            total += (a - b) ** 2 / (a + b)
    return total


def transitions(code):
    bits = [(code >> k) & 1 for k in range(8)]
    return sum(bits[k] != bits[(k + 1) % 8] for k in range(8))


def lbp_code_at(plane, y, x, radius=2, points=8):
    """LBP code of one pixel with replicate padding and bilinear sampling."""
    h, w = len(plane), len(plane[0])

    def px(yy, xx):
        return plane[min(max(yy, 0), h - 1)][min(max(xx, 0), w - 1)]

    centre = plane[y][x]
    code = 0
    for k in range(points):
        ang = 2 * math.pi * k / points
        sx = x + radius * math.cos(ang)
        sy = y - radius * math.sin(ang)
        sx, sy = round(sx, 9), round(sy, 9)
        x0, y0 = math.floor(sx), math.floor(sy)
        fx, fy = sx - x0, sy - y0
        v = ((1 - fx) * (1 - fy) * px(y0, x0) + fx * (1 - fy) * px(y0, x0 + 1)
             + (1 - fx) * fy * px(y0 + 1, x0) + fx * fy * px(y0 + 1, x0 + 1))
        if v >= centre:
            code |= 1 << k
    return code


def count_rank_hits(dist, probe_ids, gallery_ids, k):
    """Probes whose true identity is among the k smallest distances (index tie-break)."""
    hits = 0
    for i, row in enumerate(dist):
        order = sorted(range(len(row)), key=lambda j: (row[j], j))
        if probe_ids[i] in [gallery_ids[j] for j in order[:k]]:
            hits += 1
    return hits
