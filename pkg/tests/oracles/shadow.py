"""Exact illuminated fraction for axis-aligned rectangle scenes.

A horizontal plate (normal +z) at height ``z_plate`` and optional horizontal
occluder rectangles above it, lit from straight overhead (elevation 90 deg)
or along a direction with components (sx, sy, sz), sz > 0. Shadows are the
occluder rectangles translated along the light direction onto the plate
plane; the lit fraction is one minus the union of their overlaps with the
plate, divided by the plate area.
"""


def _overlap_1d(a0, a1, b0, b1):
    return max(0.0, min(a1, b1) - max(a0, b0))


def _union_area(rects):
    # exact union area of axis-aligned rectangles by coordinate compression
    xs = sorted({v for r in rects for v in (r[0], r[2])})
    ys = sorted({v for r in rects for v in (r[1], r[3])})
    area = 0.0
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            cx = 0.5 * (xs[i] + xs[i + 1])
            cy = 0.5 * (ys[j] + ys[j + 1])
            if any(r[0] <= cx <= r[2] and r[1] <= cy <= r[3] for r in rects):
                area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j])
    return area


def oracle_shadow_geometry(plate, occluders, light=(0.0, 0.0, 1.0)):
    """``plate`` = (x0, y0, x1, y1, z); each occluder = (x0, y0, x1, y1, z) with z above the plate.

    ``light`` points from the scene toward the sun.
    """
    for rect in [plate, *occluders]:
        if len(rect) != 5 or rect[0] >= rect[2] or rect[1] >= rect[3]:
            raise ValueError("rectangles must be axis-aligned (x0, y0, x1, y1, z) with x0 < x1, y0 < y1")
    sx, sy, sz = (float(v) for v in light)
    if sz <= 0:
        raise ValueError("light must come from above the plate")
    px0, py0, px1, py1, pz = plate
    clipped = []
    for ox0, oy0, ox1, oy1, oz in occluders:
        if oz <= pz:
            continue
        h = oz - pz
        dx, dy = -sx / sz * h, -sy / sz * h
        r = (ox0 + dx, oy0 + dy, ox1 + dx, oy1 + dy)
        w = _overlap_1d(px0, px1, r[0], r[2])
        v = _overlap_1d(py0, py1, r[1], r[3])
        if w > 0 and v > 0:
            clipped.append((max(px0, r[0]), max(py0, r[1]), min(px1, r[2]), min(py1, r[3])))
    plate_area = (px1 - px0) * (py1 - py0)
    return 1.0 - _union_area(clipped) / plate_area
