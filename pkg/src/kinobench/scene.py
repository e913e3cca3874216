"""Scene schema, YAML loader/dumper, built-in benchmark scenes.

A scene document is YAML with a versioned header::

    schema: 1
    bounds: {min: [0, 0], max: [10, 10]}
    robot: {radius: 0.5, mass: 1.0, start: [1.5, 1.5], goal: [8.5, 8.5], goal_radius: 1.0}
    dynamics: {f_max: 10.0, control_step: 0.07, mu: 0.5, gravity: 9.81}
    bodies:
      - id: crate
        kind: free            # fixed | free | constraint_oriented
        shape: {type: box, halfwidth: 0.4, halfheight: 0.4}
        pose: [4.0, 4.0]
        mass: 0.6
      - id: gate
        kind: constraint_oriented
        shape: {type: box, halfwidth: 0.6, halfheight: 0.7}
        pose: [5.0, 5.0]
        mass: 0.8
        allowed_push_axis: y

Scenes are immutable after loading and freely shareable.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import yaml

from .errors import KinobenchError
from .geometry import CONTACT_TOL, Box, ConvexPolygon, Disc, Shape, aabb, collide
from .world import Body, BodyKind, PushAxis

SCHEMA_VERSION = 1

DEFAULT_F_MAX = 10.0
DEFAULT_CONTROL_STEP = 0.07
DEFAULT_MU = 0.5
DEFAULT_GRAVITY = 9.81


class SceneError(KinobenchError):
    """Scene document problem; `path` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class SceneSchemaError(SceneError):
    pass


class DuplicateBodyIdError(SceneError):
    pass


class OutOfBoundsError(SceneError):
    pass


class InterpenetrationError(SceneError):
    pass


@dataclass(frozen=True)
class RobotSpec:
    radius: float
    mass: float
    start: tuple[float, float]
    goal: tuple[float, float]
    goal_radius: float


@dataclass(frozen=True)
class Dynamics:
    f_max: float = DEFAULT_F_MAX
    control_step: float = DEFAULT_CONTROL_STEP
    mu: float = DEFAULT_MU
    gravity: float = DEFAULT_GRAVITY


@dataclass(frozen=True)
class Scene:
    name: str
    bounds: tuple[tuple[float, float], tuple[float, float]]
    robot: RobotSpec
    dynamics: Dynamics
    bodies: tuple[Body, ...]

    @property
    def movable_bodies(self) -> tuple[Body, ...]:
        return tuple(b for b in self.bodies if b.movable)

    @property
    def fixed_bodies(self) -> tuple[Body, ...]:
        return tuple(b for b in self.bodies if not b.movable)


def _need(mapping, key, path, kind=None):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SceneSchemaError(f"{path}.{key}" if path else key, "missing required field")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        raise SceneSchemaError(f"{path}.{key}" if path else key,
                               f"expected {getattr(kind, '__name__', kind)}")
    return value


def _number(value, path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SceneSchemaError(path, "expected a number")
    return float(value)


def _point(value, path) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SceneSchemaError(path, "expected [x, y]")
    return (_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


def _check_keys(mapping, allowed, path):
    extra = set(mapping) - set(allowed)
    if extra:
        raise SceneSchemaError(f"{path}.{sorted(extra)[0]}", "unknown field")


def _parse_shape(doc, path) -> Shape:
    if not isinstance(doc, dict):
        raise SceneSchemaError(path, "expected a shape mapping")
    stype = _need(doc, "type", path, str)
    if stype == "disc":
        _check_keys(doc, {"type", "radius"}, path)
        return Disc(radius=_number(_need(doc, "radius", path), f"{path}.radius"))
    if stype == "box":
        _check_keys(doc, {"type", "halfwidth", "halfheight"}, path)
        return Box(halfwidth=_number(_need(doc, "halfwidth", path), f"{path}.halfwidth"),
                   halfheight=_number(_need(doc, "halfheight", path), f"{path}.halfheight"))
    if stype == "polygon":
        _check_keys(doc, {"type", "vertices"}, path)
        verts = _need(doc, "vertices", path, list)
        if len(verts) < 3:
            raise SceneSchemaError(f"{path}.vertices", "need at least 3 vertices")
        return ConvexPolygon(vertices=tuple(
            _point(v, f"{path}.vertices[{i}]") for i, v in enumerate(verts)))
    raise SceneSchemaError(f"{path}.type", f"unknown shape type {stype!r}")


def _parse_body(doc, index) -> Body:
    path = f"bodies[{index}]"
    if not isinstance(doc, dict):
        raise SceneSchemaError(path, "expected a body mapping")
    _check_keys(doc, {"id", "kind", "shape", "pose", "mass", "allowed_push_axis",
                      "friction_mu"}, path)
    bid = _need(doc, "id", path, str)
    kind_s = _need(doc, "kind", path, str)
    try:
        kind = BodyKind(kind_s)
    except ValueError:
        raise SceneSchemaError(f"{path}.kind", f"unknown kind {kind_s!r}") from None
    shape = _parse_shape(_need(doc, "shape", path), f"{path}.shape")
    pose = _point(_need(doc, "pose", path), f"{path}.pose")
    mass = None
    if "mass" in doc and doc["mass"] is not None:
        mass = _number(doc["mass"], f"{path}.mass")
    if kind is not BodyKind.FIXED and mass is None:
        raise SceneSchemaError(f"{path}.mass", "movable bodies need a mass")
    mu = None
    if "friction_mu" in doc and doc["friction_mu"] is not None:
        mu = _number(doc["friction_mu"], f"{path}.friction_mu")
    axis = PushAxis.ANY
    if "allowed_push_axis" in doc and doc["allowed_push_axis"] is not None:
        axis_s = doc["allowed_push_axis"]
        try:
            axis = PushAxis(axis_s)
        except ValueError:
            raise SceneSchemaError(f"{path}.allowed_push_axis",
                                   f"unknown axis {axis_s!r}") from None
    body = Body(id=bid, kind=kind, shape=shape, pose=pose, mass=mass,
                friction_mu=mu, allowed_push_axis=axis)
    try:
        body.validate()
    except KinobenchError as exc:
        raise SceneSchemaError(path, str(exc)) from None
    return body


def _in_bounds(point, bounds) -> bool:
    (xmin, ymin), (xmax, ymax) = bounds
    return xmin <= point[0] <= xmax and ymin <= point[1] <= ymax


def parse_scene(doc: dict, name: str = "scene") -> Scene:
    """Validate a parsed scene document and build the Scene."""
    if not isinstance(doc, dict):
        raise SceneSchemaError("", "scene document must be a mapping")
    _check_keys(doc, {"schema", "bounds", "robot", "dynamics", "bodies"}, "scene")
    version = _need(doc, "schema", "")
    if version != SCHEMA_VERSION:
        raise SceneSchemaError("schema", f"unsupported schema version {version!r}")

    bounds_doc = _need(doc, "bounds", "", dict)
    _check_keys(bounds_doc, {"min", "max"}, "bounds")
    bmin = _point(_need(bounds_doc, "min", "bounds"), "bounds.min")
    bmax = _point(_need(bounds_doc, "max", "bounds"), "bounds.max")
    if bmin[0] >= bmax[0] or bmin[1] >= bmax[1]:
        raise SceneSchemaError("bounds", "min must be strictly below max on both axes")
    bounds = (bmin, bmax)

    robot_doc = _need(doc, "robot", "", dict)
    _check_keys(robot_doc, {"radius", "mass", "start", "goal", "goal_radius"}, "robot")
    radius = _number(_need(robot_doc, "radius", "robot"), "robot.radius")
    mass = _number(_need(robot_doc, "mass", "robot"), "robot.mass")
    start = _point(_need(robot_doc, "start", "robot"), "robot.start")
    goal = _point(_need(robot_doc, "goal", "robot"), "robot.goal")
    goal_radius = _number(robot_doc.get("goal_radius", 2.0 * radius), "robot.goal_radius")
    if radius <= 0 or mass <= 0 or goal_radius <= 0:
        raise SceneSchemaError("robot", "radius, mass and goal_radius must be > 0")
    if not _in_bounds(start, bounds):
        raise OutOfBoundsError("robot.start", f"start {start} outside bounds")
    if not _in_bounds(goal, bounds):
        raise OutOfBoundsError("robot.goal", f"goal {goal} outside bounds")
    robot = RobotSpec(radius=radius, mass=mass, start=start, goal=goal,
                      goal_radius=goal_radius)

    dyn_doc = doc.get("dynamics") or {}
    if not isinstance(dyn_doc, dict):
        raise SceneSchemaError("dynamics", "expected a mapping")
    _check_keys(dyn_doc, {"f_max", "control_step", "mu", "gravity"}, "dynamics")
    dynamics = Dynamics(
        f_max=_number(dyn_doc.get("f_max", DEFAULT_F_MAX), "dynamics.f_max"),
        control_step=_number(dyn_doc.get("control_step", DEFAULT_CONTROL_STEP),
                             "dynamics.control_step"),
        mu=_number(dyn_doc.get("mu", DEFAULT_MU), "dynamics.mu"),
        gravity=_number(dyn_doc.get("gravity", DEFAULT_GRAVITY), "dynamics.gravity"),
    )
    if dynamics.f_max <= 0 or dynamics.control_step <= 0:
        raise SceneSchemaError("dynamics", "f_max and control_step must be > 0")
    if dynamics.mu < 0 or dynamics.gravity < 0:
        raise SceneSchemaError("dynamics", "mu and gravity must be >= 0")

    bodies_doc = doc.get("bodies") or []
    if not isinstance(bodies_doc, list):
        raise SceneSchemaError("bodies", "expected a list")
    bodies = tuple(_parse_body(b, i) for i, b in enumerate(bodies_doc))
    seen: dict[str, int] = {}
    for i, b in enumerate(bodies):
        if b.id in seen:
            raise DuplicateBodyIdError(f"bodies[{i}].id", f"duplicate body id {b.id!r}")
        seen[b.id] = i

    for i, b in enumerate(bodies):
        hit = collide(Disc(robot.radius), robot.start, b.shape, b.pose)
        if hit is not None and hit.depth > CONTACT_TOL:
            raise InterpenetrationError(
                f"bodies[{i}]", f"robot start interpenetrates body {b.id!r}")

    return Scene(name=name, bounds=bounds, robot=robot, dynamics=dynamics, bodies=bodies)


def load_scene(text: str, name: str = "scene") -> Scene:
    """Parse and validate a scene document from YAML text."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SceneSchemaError("", f"not valid YAML: {exc}") from None
    return parse_scene(doc, name=name)


def load_scene_file(path: str | Path) -> Scene:
    path = Path(path)
    return load_scene(path.read_text(), name=path.stem)


def _shape_doc(shape: Shape) -> dict:
    if isinstance(shape, Disc):
        return {"type": "disc", "radius": shape.radius}
    if isinstance(shape, Box):
        return {"type": "box", "halfwidth": shape.halfwidth, "halfheight": shape.halfheight}
    return {"type": "polygon", "vertices": [list(v) for v in shape.vertices]}


def dump_scene(scene: Scene) -> str:
    """Serialize a Scene back to YAML; load_scene(dump_scene(s)) == s."""
    doc: dict = {
        "schema": SCHEMA_VERSION,
        "bounds": {"min": list(scene.bounds[0]), "max": list(scene.bounds[1])},
        "robot": {
            "radius": scene.robot.radius,
            "mass": scene.robot.mass,
            "start": list(scene.robot.start),
            "goal": list(scene.robot.goal),
            "goal_radius": scene.robot.goal_radius,
        },
        "dynamics": {
            "f_max": scene.dynamics.f_max,
            "control_step": scene.dynamics.control_step,
            "mu": scene.dynamics.mu,
            "gravity": scene.dynamics.gravity,
        },
        "bodies": [],
    }
    for b in scene.bodies:
        entry: dict = {"id": b.id, "kind": b.kind.value, "shape": _shape_doc(b.shape),
                       "pose": list(b.pose)}
        if b.mass is not None:
            entry["mass"] = b.mass
        if b.friction_mu is not None:
            entry["friction_mu"] = b.friction_mu
        if b.allowed_push_axis is not PushAxis.ANY:
            entry["allowed_push_axis"] = b.allowed_push_axis.value
        doc["bodies"].append(entry)
    return yaml.safe_dump(doc, sort_keys=False)


def _walls() -> list[dict]:
    return [
        {"id": "wall_s", "kind": "fixed",
         "shape": {"type": "box", "halfwidth": 5.0, "halfheight": 0.2}, "pose": [5.0, 0.2]},
        {"id": "wall_n", "kind": "fixed",
         "shape": {"type": "box", "halfwidth": 5.0, "halfheight": 0.2}, "pose": [5.0, 9.8]},
        {"id": "wall_w", "kind": "fixed",
         "shape": {"type": "box", "halfwidth": 0.2, "halfheight": 5.0}, "pose": [0.2, 5.0]},
        {"id": "wall_e", "kind": "fixed",
         "shape": {"type": "box", "halfwidth": 0.2, "halfheight": 5.0}, "pose": [9.8, 5.0]},
    ]


def _builtin_docs() -> dict[str, dict]:
    base = {
        "schema": SCHEMA_VERSION,
        "bounds": {"min": [0.0, 0.0], "max": [10.0, 10.0]},
        "dynamics": {"f_max": 10.0, "control_step": 0.07, "mu": 0.2, "gravity": 9.81},
    }
    scene1 = dict(base)
    scene1["robot"] = {"radius": 0.5, "mass": 1.0, "start": [1.5, 1.5],
                       "goal": [8.5, 8.5], "goal_radius": 1.0}
    scene1["bodies"] = _walls() + [
        {"id": "block_a", "kind": "fixed",
         "shape": {"type": "box", "halfwidth": 0.7, "halfheight": 0.5}, "pose": [5.0, 7.0]},
        {"id": "prism_a", "kind": "fixed",
         "shape": {"type": "polygon",
                   "vertices": [[-0.9, -0.6], [0.9, -0.6], [0.0, 1.0]]},
         "pose": [6.5, 2.5]},
        {"id": "crate_a", "kind": "free",
         "shape": {"type": "box", "halfwidth": 0.4, "halfheight": 0.4},
         "pose": [4.0, 4.0], "mass": 0.6},
        {"id": "crate_b", "kind": "free",
         "shape": {"type": "box", "halfwidth": 0.4, "halfheight": 0.4},
         "pose": [6.5, 6.0], "mass": 0.6},
        {"id": "crate_c", "kind": "free",
         "shape": {"type": "disc", "radius": 0.4},
         "pose": [3.0, 7.0], "mass": 0.5},
    ]

    # A dividing wall with its only gap fully occupied by a body that may
    # be pushed along y only: no collision-free route exists.
    scene2 = dict(base)
    scene2["robot"] = {"radius": 0.5, "mass": 1.0, "start": [1.5, 1.5],
                       "goal": [7.5, 7.5], "goal_radius": 1.0}
    scene2["bodies"] = _walls() + [
        {"id": "divider_w", "kind": "fixed",
         "shape": {"type": "box", "halfwidth": 1.95, "halfheight": 0.3}, "pose": [2.35, 5.0]},
        {"id": "divider_e", "kind": "fixed",
         "shape": {"type": "box", "halfwidth": 1.95, "halfheight": 0.3}, "pose": [7.65, 5.0]},
        {"id": "gate", "kind": "constraint_oriented",
         "shape": {"type": "box", "halfwidth": 0.66, "halfheight": 0.7},
         "pose": [5.0, 5.0], "mass": 0.8, "allowed_push_axis": "y"},
        {"id": "crate_a", "kind": "free",
         "shape": {"type": "box", "halfwidth": 0.4, "halfheight": 0.4},
         "pose": [2.5, 2.8], "mass": 0.6},
        {"id": "crate_b", "kind": "free",
         "shape": {"type": "box", "halfwidth": 0.4, "halfheight": 0.4},
         "pose": [7.0, 2.0], "mass": 0.6},
    ]

    # Goal region occupied by a body pushable along x only; highest clutter.
    scene3 = dict(base)
    scene3["robot"] = {"radius": 0.5, "mass": 1.0, "start": [1.5, 1.5],
                       "goal": [7.5, 7.5], "goal_radius": 0.5}
    scene3["bodies"] = _walls() + [
        {"id": "squatter", "kind": "constraint_oriented",
         "shape": {"type": "box", "halfwidth": 0.5, "halfheight": 0.5},
         "pose": [7.5, 7.5], "mass": 0.8, "allowed_push_axis": "x"},
        {"id": "prism_a", "kind": "fixed",
         "shape": {"type": "polygon",
                   "vertices": [[-0.8, -0.6], [0.8, -0.6], [0.0, 0.9]]},
         "pose": [3.0, 3.0]},
        {"id": "prism_b", "kind": "fixed",
         "shape": {"type": "polygon",
                   "vertices": [[-0.7, -0.5], [0.7, -0.5], [0.0, 0.8]]},
         "pose": [8.0, 3.5]},
        {"id": "block_a", "kind": "fixed",
         "shape": {"type": "box", "halfwidth": 0.8, "halfheight": 0.4}, "pose": [5.0, 5.5]},
        {"id": "block_b", "kind": "fixed",
         "shape": {"type": "box", "halfwidth": 0.5, "halfheight": 0.5}, "pose": [2.0, 6.5]},
        {"id": "crate_a", "kind": "free",
         "shape": {"type": "box", "halfwidth": 0.4, "halfheight": 0.4},
         "pose": [4.5, 2.0], "mass": 0.6},
        {"id": "crate_b", "kind": "free",
         "shape": {"type": "box", "halfwidth": 0.4, "halfheight": 0.4},
         "pose": [3.5, 8.0], "mass": 0.6},
        {"id": "crate_c", "kind": "free",
         "shape": {"type": "disc", "radius": 0.4},
         "pose": [6.0, 4.0], "mass": 0.5},
    ]
    return {"scene1": scene1, "scene2": scene2, "scene3": scene3}


BUILTIN_SCENES = ("scene1", "scene2", "scene3")


@lru_cache(maxsize=None)
def builtin_scene(name: str) -> Scene:
    """One of the three built-in benchmark scenes: scene1, scene2, scene3."""
    key = name.lower()
    docs = _builtin_docs()
    if key not in docs:
        raise KeyError(f"unknown builtin scene {name!r}; choose from {BUILTIN_SCENES}")
    return parse_scene(docs[key], name=key)


def goal_reachable_static(scene: Scene, resolution: float = 0.1) -> bool:
    """Whether a collision-free robot path start->goal exists with every body static.

    Grid flood fill over the robot's free space: a cell is free when the
    robot disc at the cell center overlaps nothing. The goal counts as
    reached when a reachable free cell center lies within goal_radius of
    the goal center. Used as the independent geometric oracle for scenes
    that require pushing.
    """
    (xmin, ymin), (xmax, ymax) = scene.bounds
    r = scene.robot.radius
    gx, gy = scene.robot.goal
    goal_r = scene.robot.goal_radius
    nx = max(1, int(round((xmax - xmin) / resolution)))
    ny = max(1, int(round((ymax - ymin) / resolution)))
    dx = (xmax - xmin) / nx
    dy = (ymax - ymin) / ny

    obstacles = [(b.shape, b.pose, aabb(b.shape, b.pose)) for b in scene.bodies]

    def free(cx: float, cy: float) -> bool:
        for shape, pose, bb in obstacles:
            if (cx + r < bb[0] - CONTACT_TOL or cx - r > bb[2] + CONTACT_TOL
                    or cy + r < bb[1] - CONTACT_TOL or cy - r > bb[3] + CONTACT_TOL):
                continue
            hit = collide(Disc(r), (cx, cy), shape, pose)
            if hit is not None and hit.depth > 1e-9:
                return False
        return True

    def center(i: int, j: int) -> tuple[float, float]:
        return (xmin + (i + 0.5) * dx, ymin + (j + 0.5) * dy)

    sx, sy = scene.robot.start
    if math.hypot(sx - gx, sy - gy) <= goal_r:
        return True
    si = min(nx - 1, max(0, int((sx - xmin) / dx)))
    sj = min(ny - 1, max(0, int((sy - ymin) / dy)))
    if not free(*center(si, sj)):
        return False

    seen = [[False] * ny for _ in range(nx)]
    queue: deque[tuple[int, int]] = deque([(si, sj)])
    seen[si][sj] = True
    while queue:
        i, j = queue.popleft()
        cx, cy = center(i, j)
        if math.hypot(cx - gx, cy - gy) <= goal_r:
            return True
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if 0 <= ni < nx and 0 <= nj < ny and not seen[ni][nj]:
                seen[ni][nj] = True
                if free(*center(ni, nj)):
                    queue.append((ni, nj))
    return False
