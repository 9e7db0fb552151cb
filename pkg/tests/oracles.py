"""Brute-force reference implementations the tests check the library against.

Everything here favors obviousness over speed: scalar loops, explicit flood
fills, exhaustive searches.  None of it shares code with the package.
"""

from collections import deque

import numpy as np


def piecewise_map(value: float, breakpoints) -> float:
    """Scalar piecewise-linear interpolation through (input, output) pairs."""
    pts = sorted(breakpoints)
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if x0 <= value <= x1:
            if x1 == x0:
                return y1
            return y0 + (value - x0) * (y1 - y0) / (x1 - x0)
    raise AssertionError(f"value {value} outside breakpoint span")


def round_half_away(x: float) -> int:
    return int(np.sign(x) * np.floor(abs(x) + 0.5))


def circular_distance(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def erode(mask: np.ndarray, side: int) -> np.ndarray:
    """Set-theoretic erosion; out-of-bounds neighbors count as background."""
    h, w = mask.shape
    r = side // 2
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            keep = True
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy, xx = y + dy, x + dx
                    if not (0 <= yy < h and 0 <= xx < w) or mask[yy, xx] == 0:
                        keep = False
                        break
                if not keep:
                    break
            out[y, x] = 1 if keep else 0
    return out


def dilate(mask: np.ndarray, side: int) -> np.ndarray:
    h, w = mask.shape
    r = side // 2
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            hit = False
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] == 1:
                        hit = True
                        break
                if hit:
                    break
            out[y, x] = 1 if hit else 0
    return out


def open_mask(mask: np.ndarray, side: int) -> np.ndarray:
    return dilate(erode(mask, side), side)


def flood_components(mask: np.ndarray, connectivity: int) -> list[set]:
    """Connected components of the 1-pixels as sets of (x, y)."""
    h, w = mask.shape
    if connectivity == 8:
        neighbors = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        neighbors = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if mask[y, x] != 1 or seen[y, x]:
                continue
            comp = set()
            queue = deque([(y, x)])
            seen[y, x] = True
            while queue:
                cy, cx = queue.popleft()
                comp.add((cx, cy))
                for dy, dx in neighbors:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] == 1 and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            comps.append(comp)
    return comps


def hole_count(mask: np.ndarray) -> int:
    """4-connected background components that do not touch the border."""
    background = (np.asarray(mask) == 0).astype(np.uint8)
    h, w = background.shape
    holes = 0
    for comp in flood_components(background, 4):
        if not any(x in (0, w - 1) or y in (0, h - 1) for x, y in comp):
            holes += 1
    return holes


def euler_number(mask: np.ndarray) -> int:
    return len(flood_components(np.asarray(mask), 8)) - hole_count(mask)


def fill_holes(mask: np.ndarray) -> np.ndarray:
    out = np.asarray(mask).copy()
    h, w = out.shape
    background = (out == 0).astype(np.uint8)
    for comp in flood_components(background, 4):
        if not any(x in (0, w - 1) or y in (0, h - 1) for x, y in comp):
            for x, y in comp:
                out[y, x] = 1
    return out


def otsu_threshold(values) -> int:
    """Exhaustive search over all 256 thresholds, classes < t and >= t."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    best_t, best_score = 1, -1.0
    for t in range(1, 256):
        lo = values[values < t]
        hi = values[values >= t]
        if lo.size == 0 or hi.size == 0:
            continue
        score = lo.size * hi.size * (lo.mean() - hi.mean()) ** 2
        if score > best_score:
            best_t, best_score = t, score
    return best_t


def ncc(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Exhaustive zero-mean normalized cross-correlation, valid offsets."""
    image = np.asarray(image, dtype=np.float64)
    t = np.asarray(template, dtype=np.float64)
    t = t - t.mean()
    t_norm = np.sqrt((t * t).sum())
    th, tw = t.shape
    out = np.zeros((image.shape[0] - th + 1, image.shape[1] - tw + 1))
    for y in range(out.shape[0]):
        for x in range(out.shape[1]):
            win = image[y : y + th, x : x + tw]
            centered = win - win.mean()
            denom = np.sqrt((centered * centered).sum()) * t_norm
            if denom > 0 and (centered != 0).any():
                out[y, x] = (centered * t).sum() / denom
    return out


def bilinear_sample(src: np.ndarray, x: float, y: float) -> float:
    """Scalar bilinear read with edge clamping."""
    h, w = src.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def resample_bilinear(src: np.ndarray, width: int, height: int) -> np.ndarray:
    src = np.asarray(src, dtype=np.float64)
    out = np.zeros((height, width))
    for yi in range(height):
        for xi in range(width):
            sx = (xi + 0.5) * (src.shape[1] / width) - 0.5
            sy = (yi + 0.5) * (src.shape[0] / height) - 0.5
            out[yi, xi] = bilinear_sample(src, sx, sy)
    return out


def graph_similarity(node_scores, image_edges, ref_edges, lam: float) -> float:
    """Direct evaluation of the graph similarity formula."""
    jet_term = sum(node_scores) / len(node_scores)
    edge_term = 0.0
    for (ix, iy), (rx, ry) in zip(image_edges, ref_edges):
        ref_sq = rx * rx + ry * ry
        if ref_sq == 0:
            continue
        edge_term += ((ix - rx) ** 2 + (iy - ry) ** 2) / ref_sq
    return jet_term - lam / len(image_edges) * edge_term


def histogram(values, bins: int) -> np.ndarray:
    counts = np.zeros(bins)
    for v in np.asarray(values).reshape(-1):
        idx = min(int(v * bins), bins - 1)
        counts[idx] += 1
    return counts / counts.sum()
