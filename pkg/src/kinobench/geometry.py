"""2D collision geometry for discs, axis-aligned boxes and convex polygons.

All shapes translate only (no rotation), so a pose is just the world
position of the shape origin. Contact normals always point from the second
shape (b) towards the first (a), and `depth` is positive when the shapes
overlap. Pairs closer than CONTACT_TOL still produce a contact record with
a small negative depth so that touching contacts are observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import StructuralError

# Separations larger than this yield no contact; also the maximum
# interpenetration a resolved, valid state may exhibit.
CONTACT_TOL = 1e-3


@dataclass(frozen=True)
class Disc:
    radius: float


@dataclass(frozen=True)
class Box:
    halfwidth: float
    halfheight: float


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon given by counter-clockwise vertices relative to its origin."""

    vertices: tuple[tuple[float, float], ...]


Shape = Disc | Box | ConvexPolygon


@dataclass(frozen=True)
class Contact:
    point: tuple[float, float]
    normal: tuple[float, float]  # unit vector, from shape b to shape a
    depth: float  # > 0 penetrating, in (-CONTACT_TOL, 0] touching


def aabb(shape: Shape, pose: tuple[float, float]) -> tuple[float, float, float, float]:
    """Axis-aligned bounding box (xmin, ymin, xmax, ymax) of a posed shape."""
    x, y = pose
    if isinstance(shape, Disc):
        r = shape.radius
        return (x - r, y - r, x + r, y + r)
    if isinstance(shape, Box):
        return (x - shape.halfwidth, y - shape.halfheight, x + shape.halfwidth, y + shape.halfheight)
    if isinstance(shape, ConvexPolygon):
        xs = [v[0] for v in shape.vertices]
        ys = [v[1] for v in shape.vertices]
        return (x + min(xs), y + min(ys), x + max(xs), y + max(ys))
    raise StructuralError(f"unknown shape type {type(shape).__name__}")


def validate_polygon(vertices: tuple[tuple[float, float], ...]) -> None:
    """Check counter-clockwise winding and strict convexity."""
    n = len(vertices)
    if n < 3:
        raise StructuralError("polygon needs at least 3 vertices")
    for i in range(n):
        ax, ay = vertices[i]
        bx, by = vertices[(i + 1) % n]
        cx, cy = vertices[(i + 2) % n]
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if cross <= 0.0:
            raise StructuralError("polygon vertices must be counter-clockwise and strictly convex")


def _disc_disc(ax, ay, ra, bx, by, rb):
    dx = ax - bx
    dy = ay - by
    d2 = dx * dx + dy * dy
    rsum = ra + rb
    limit = rsum + CONTACT_TOL
    if d2 > limit * limit:
        return None
    d = math.sqrt(d2)
    if d == 0.0:
        # Coincident centers: deterministic tie-break along +x.
        return ((ax, ay), (1.0, 0.0), rsum)
    nx = dx / d
    ny = dy / d
    depth = rsum - d
    px = ax - nx * (ra - 0.5 * depth)
    py = ay - ny * (ra - 0.5 * depth)
    return ((px, py), (nx, ny), depth)


def _disc_box(ax, ay, r, bx, by, hw, hh):
    """Disc a against axis-aligned box b; normal points from box to disc."""
    dx = ax - bx
    dy = ay - by
    qx = dx if -hw <= dx <= hw else (hw if dx > hw else -hw)
    qy = dy if -hh <= dy <= hh else (hh if dy > hh else -hh)
    if qx != dx or qy != dy:
        # Disc center outside the box: measure to the clamped surface point.
        ex = dx - qx
        ey = dy - qy
        d2 = ex * ex + ey * ey
        limit = r + CONTACT_TOL
        if d2 > limit * limit:
            return None
        d = math.sqrt(d2)
        if d == 0.0:  # center exactly on the boundary
            nx, ny = (1.0 if dx >= 0 else -1.0, 0.0)
            depth = r
        else:
            nx = ex / d
            ny = ey / d
            depth = r - d
        px = bx + qx
        py = by + qy
        return ((px, py), (nx, ny), depth)
    # Center inside the box: push out through the nearest face.
    pen_x = hw - abs(dx)
    pen_y = hh - abs(dy)
    if pen_x <= pen_y:
        nx = 1.0 if dx >= 0 else -1.0
        ny = 0.0
        depth = r + pen_x
        px = bx + (hw if nx > 0 else -hw)
        py = ay
    else:
        nx = 0.0
        ny = 1.0 if dy >= 0 else -1.0
        depth = r + pen_y
        px = ax
        py = by + (hh if ny > 0 else -hh)
    return ((px, py), (nx, ny), depth)


def _box_box(ax, ay, ahw, ahh, bx, by, bhw, bhh):
    dx = ax - bx
    dy = ay - by
    ox = (ahw + bhw) - abs(dx)
    oy = (ahh + bhh) - abs(dy)
    if ox <= -CONTACT_TOL or oy <= -CONTACT_TOL:
        return None
    if ox <= oy:
        nx = 1.0 if dx >= 0 else -1.0
        ny = 0.0
        depth = ox
    else:
        nx = 0.0
        ny = 1.0 if dy >= 0 else -1.0
        depth = oy
    # Contact point: center of the overlap rectangle.
    px = 0.5 * (max(ax - ahw, bx - bhw) + min(ax + ahw, bx + bhw))
    py = 0.5 * (max(ay - ahh, by - bhh) + min(ay + ahh, by + bhh))
    return ((px, py), (nx, ny), depth)


def _disc_polygon(ax, ay, r, verts):
    """Disc a against convex polygon with world-space CCW vertices."""
    n = len(verts)
    inside = True
    best_edge_depth = math.inf
    best_edge = None
    best_sep2 = math.inf
    best_q = None
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        ex = x1 - x0
        ey = y1 - y0
        elen = math.hypot(ex, ey)
        nox = ey / elen  # outward normal for CCW winding
        noy = -ex / elen
        sd = (ax - x0) * nox + (ay - y0) * noy
        if sd > 0.0:
            inside = False
        else:
            if -sd < best_edge_depth:
                best_edge_depth = -sd
                best_edge = (nox, noy)
        # Closest point on this edge segment to the disc center.
        t = ((ax - x0) * ex + (ay - y0) * ey) / (elen * elen)
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
        qx = x0 + t * ex
        qy = y0 + t * ey
        sep2 = (ax - qx) ** 2 + (ay - qy) ** 2
        if sep2 < best_sep2:
            best_sep2 = sep2
            best_q = (qx, qy)
    if inside:
        nox, noy = best_edge
        return ((ax, ay), (nox, noy), r + best_edge_depth)
    d = math.sqrt(best_sep2)
    limit = r + CONTACT_TOL
    if d > limit:
        return None
    qx, qy = best_q
    if d == 0.0:
        nox, noy = best_edge if best_edge else (1.0, 0.0)
        return ((qx, qy), (nox, noy), r)
    return ((qx, qy), ((ax - qx) / d, (ay - qy) / d), r - d)


def _support(verts, dx, dy):
    best = verts[0]
    best_dot = best[0] * dx + best[1] * dy
    for v in verts[1:]:
        dot = v[0] * dx + v[1] * dy
        if dot > best_dot:
            best_dot = dot
            best = v
    return best


def _poly_poly(va, vb):
    """SAT on two convex CCW polygons in world space; normal from b to a."""
    best_depth = math.inf
    best_axis = None
    for verts in (va, vb):
        n = len(verts)
        for i in range(n):
            x0, y0 = verts[i]
            x1, y1 = verts[(i + 1) % n]
            ex = x1 - x0
            ey = y1 - y0
            elen = math.hypot(ex, ey)
            axx = ey / elen
            axy = -ex / elen
            amin = amax = va[0][0] * axx + va[0][1] * axy
            for v in va[1:]:
                p = v[0] * axx + v[1] * axy
                if p < amin:
                    amin = p
                elif p > amax:
                    amax = p
            bmin = bmax = vb[0][0] * axx + vb[0][1] * axy
            for v in vb[1:]:
                p = v[0] * axx + v[1] * axy
                if p < bmin:
                    bmin = p
                elif p > bmax:
                    bmax = p
            overlap = min(amax, bmax) - max(amin, bmin)
            if overlap <= -CONTACT_TOL:
                return None
            if overlap < best_depth:
                best_depth = overlap
                best_axis = (axx, axy)
    axx, axy = best_axis
    ca = (sum(v[0] for v in va) / len(va), sum(v[1] for v in va) / len(va))
    cb = (sum(v[0] for v in vb) / len(vb), sum(v[1] for v in vb) / len(vb))
    if (ca[0] - cb[0]) * axx + (ca[1] - cb[1]) * axy < 0.0:
        axx = -axx
        axy = -axy
    sa = _support(va, -axx, -axy)
    sb = _support(vb, axx, axy)
    point = (0.5 * (sa[0] + sb[0]), 0.5 * (sa[1] + sb[1]))
    return (point, (axx, axy), best_depth)


def _world_verts(poly: ConvexPolygon, pose: tuple[float, float]):
    px, py = pose
    return tuple((vx + px, vy + py) for vx, vy in poly.vertices)


def _box_verts(box: Box, pose: tuple[float, float]):
    x, y = pose
    hw, hh = box.halfwidth, box.halfheight
    return ((x - hw, y - hh), (x + hw, y - hh), (x + hw, y + hh), (x - hw, y + hh))


def collide(shape_a: Shape, pose_a: tuple[float, float],
            shape_b: Shape, pose_b: tuple[float, float]) -> Contact | None:
    """Deepest-penetration contact between two posed shapes, or None.

    The normal points from b to a. Returns None when the shapes are
    separated by more than CONTACT_TOL.
    """
    ax, ay = pose_a
    bx, by = pose_b
    if isinstance(shape_a, Disc):
        if isinstance(shape_b, Disc):
            hit = _disc_disc(ax, ay, shape_a.radius, bx, by, shape_b.radius)
        elif isinstance(shape_b, Box):
            hit = _disc_box(ax, ay, shape_a.radius, bx, by, shape_b.halfwidth, shape_b.halfheight)
        elif isinstance(shape_b, ConvexPolygon):
            hit = _disc_polygon(ax, ay, shape_a.radius, _world_verts(shape_b, pose_b))
        else:
            raise StructuralError(f"unsupported shape pair Disc/{type(shape_b).__name__}")
        return Contact(*hit) if hit else None
    if isinstance(shape_a, Box):
        if isinstance(shape_b, Disc):
            flipped = collide(shape_b, pose_b, shape_a, pose_a)
            return _flip(flipped)
        if isinstance(shape_b, Box):
            hit = _box_box(ax, ay, shape_a.halfwidth, shape_a.halfheight,
                           bx, by, shape_b.halfwidth, shape_b.halfheight)
        elif isinstance(shape_b, ConvexPolygon):
            hit = _poly_poly(_box_verts(shape_a, pose_a), _world_verts(shape_b, pose_b))
        else:
            raise StructuralError(f"unsupported shape pair Box/{type(shape_b).__name__}")
        return Contact(*hit) if hit else None
    if isinstance(shape_a, ConvexPolygon):
        if isinstance(shape_b, Disc):
            return _flip(collide(shape_b, pose_b, shape_a, pose_a))
        if isinstance(shape_b, Box):
            hit = _poly_poly(_world_verts(shape_a, pose_a), _box_verts(shape_b, pose_b))
        elif isinstance(shape_b, ConvexPolygon):
            hit = _poly_poly(_world_verts(shape_a, pose_a), _world_verts(shape_b, pose_b))
        else:
            raise StructuralError(f"unsupported shape pair ConvexPolygon/{type(shape_b).__name__}")
        return Contact(*hit) if hit else None
    raise StructuralError(f"unsupported shape pair {type(shape_a).__name__}/{type(shape_b).__name__}")


def _flip(contact: Contact | None) -> Contact | None:
    if contact is None:
        return None
    nx, ny = contact.normal
    return Contact(contact.point, (-nx, -ny), contact.depth)
