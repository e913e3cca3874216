"""Deterministic 2D rigid-body propagation with pushing constraints.

The robot is a force-controlled disc; obstacles are fixed or pushable
bodies that translate in the plane (no rotation). Propagation integrates
the robot under a constant force at a fixed internal substep, resolves
contacts with restitution-free impulses, applies ground Coulomb friction,
and rejects states that break the per-body manipulation rules (pushing a
constraint-oriented body on a disallowed face, penetrating a fixed body,
leaving the world bounds).

Everything here is a pure function of its inputs: repeated calls are
bit-identical, and fixed bodies never move.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import ContractError, StructuralError
from .geometry import (
    CONTACT_TOL,
    Box,
    ConvexPolygon,
    Disc,
    Shape,
    _box_box,
    _box_verts,
    _disc_box,
    _disc_disc,
    _disc_polygon,
    _poly_poly,
    _world_verts,
    aabb,
    validate_polygon,
)

if TYPE_CHECKING:
    from .scene import Scene

# Substeps per control step; the integrator substep is control_step / SUBSTEPS.
SUBSTEPS = 10
# Residual penetration left by positional correction.
SLOP = 0.5 * CONTACT_TOL
# Maximum positional correction per substep; deeper overlaps are treated as
# unrecoverable and invalidate the state.
MAX_CORRECTION = 0.1
# A push face is allowed when the contact normal is within 30 degrees of the
# allowed push axis (either direction along the axis).
PUSH_FACE_COS = math.cos(math.radians(30.0))

ROBOT_ID = "robot"


class BodyKind(enum.Enum):
    FIXED = "fixed"
    FREE = "free"
    CONSTRAINT_ORIENTED = "constraint_oriented"


class PushAxis(enum.Enum):
    X = "x"
    Y = "y"
    ANY = "any"


@dataclass(frozen=True)
class Body:
    """A rigid object in the scene with its manipulation class."""

    id: str
    kind: BodyKind
    shape: Shape
    pose: tuple[float, float]
    mass: float | None = None
    friction_mu: float | None = None
    allowed_push_axis: PushAxis = PushAxis.ANY

    @property
    def movable(self) -> bool:
        return self.kind is not BodyKind.FIXED

    def validate(self) -> None:
        if self.movable:
            if self.mass is None or self.mass <= 0.0:
                raise ContractError(f"body {self.id!r}: movable bodies need mass > 0")
        if self.friction_mu is not None and self.friction_mu < 0.0:
            raise ContractError(f"body {self.id!r}: friction_mu must be >= 0")
        if isinstance(self.shape, ConvexPolygon):
            validate_polygon(self.shape.vertices)
        elif isinstance(self.shape, Disc):
            if self.shape.radius <= 0.0:
                raise ContractError(f"body {self.id!r}: disc radius must be > 0")
        elif isinstance(self.shape, Box):
            if self.shape.halfwidth <= 0.0 or self.shape.halfheight <= 0.0:
                raise ContractError(f"body {self.id!r}: box half-extents must be > 0")


@dataclass
class WorldState:
    """Robot pose/velocity and the pose/velocity of every movable body."""

    robot_pos: tuple[float, float]
    robot_vel: tuple[float, float]
    body_poses: dict[str, tuple[tuple[float, float], tuple[float, float]]]
    time: float = 0.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WorldState):
            return NotImplemented
        return (self.robot_pos == other.robot_pos
                and self.robot_vel == other.robot_vel
                and self.time == other.time
                and self.body_poses == other.body_poses)


@dataclass(frozen=True)
class Control:
    """Constant planar force applied to the robot center for a duration."""

    force: tuple[float, float]
    duration: float

    def steps(self, control_step: float) -> int:
        """Duration expressed in control steps; raises if not a multiple."""
        k = round(self.duration / control_step)
        if k < 1 or abs(self.duration - k * control_step) > 1e-9 * max(1.0, self.duration):
            raise ContractError(
                f"control duration {self.duration} is not a positive multiple of {control_step}")
        return k


@dataclass(frozen=True)
class ContactRecord:
    """A contact between two named entities; normal points from b to a."""

    a: str
    b: str
    normal: tuple[float, float]
    depth: float
    point: tuple[float, float] = (0.0, 0.0)


@dataclass
class PropagationResult:
    """Outcome of propagating one control, with the robot substep trace."""

    final: WorldState
    valid: bool
    violation: str | None
    path_length: float
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    events: list[tuple[float, ContactRecord]] | None = None

    @property
    def trace(self) -> list[tuple[float, tuple[float, float], tuple[float, float]]]:
        return [
            (float(self.times[i]),
             (float(self.positions[i, 0]), float(self.positions[i, 1])),
             (float(self.velocities[i, 0]), float(self.velocities[i, 1])))
            for i in range(len(self.times))
        ]


# Shape codes used by the propagator's dispatch.
_DISC, _BOX, _POLY = 0, 1, 2


def _shape_code(shape: Shape):
    if isinstance(shape, Disc):
        return _DISC, shape.radius
    if isinstance(shape, Box):
        return _BOX, (shape.halfwidth, shape.halfheight)
    if isinstance(shape, ConvexPolygon):
        return _POLY, shape.vertices
    raise StructuralError(f"unknown shape type {type(shape).__name__}")


class _Model:
    """Per-scene propagation tables, precomputed once."""

    def __init__(self, scene: "Scene"):
        self.h = scene.dynamics.control_step / SUBSTEPS
        self.control_step = scene.dynamics.control_step
        self.f_max = scene.dynamics.f_max
        self.gravity = scene.dynamics.gravity
        self.bounds = scene.bounds
        self.robot_radius = scene.robot.radius
        self.robot_mass = scene.robot.mass
        mu_default = scene.dynamics.mu

        movable = [b for b in scene.bodies if b.movable]
        self.movable_ids = tuple(b.id for b in movable)
        # Dynamic entities: index 0 is the robot, then movable bodies in
        # scene order.
        self.n_dyn = 1 + len(movable)
        self.inv_mass = [1.0 / scene.robot.mass]
        self.codes = [_DISC]
        self.params = [scene.robot.radius]
        self.decel = [mu_default * self.gravity]
        self.ids = [ROBOT_ID]
        self.co_axis: list[tuple[float, float] | None] = [None]
        for b in movable:
            self.inv_mass.append(1.0 / b.mass)
            code, params = _shape_code(b.shape)
            self.codes.append(code)
            self.params.append(params)
            mu = b.friction_mu if b.friction_mu is not None else mu_default
            self.decel.append(mu * self.gravity)
            self.ids.append(b.id)
            axis = None
            if b.kind is BodyKind.CONSTRAINT_ORIENTED:
                if b.allowed_push_axis is PushAxis.X:
                    axis = (1.0, 0.0)
                elif b.allowed_push_axis is PushAxis.Y:
                    axis = (0.0, 1.0)
            self.co_axis.append(axis)
        # Relative AABBs of dynamic entities (pose-independent).
        self.rel_aabb = [aabb(Disc(scene.robot.radius), (0.0, 0.0))]
        for b in movable:
            self.rel_aabb.append(aabb(b.shape, (0.0, 0.0)))

        self.fixed = []
        for b in scene.bodies:
            if b.movable:
                continue
            code, params = _shape_code(b.shape)
            if code == _POLY:
                params = _world_verts(b.shape, b.pose)
            self.fixed.append((b.id, code, params, b.pose, aabb(b.shape, b.pose)))

        # Kind/axis lookup for validity rules, keyed by entity id.
        self.kind_of: dict[str, BodyKind] = {b.id: b.kind for b in scene.bodies}
        self.axis_of: dict[str, tuple[float, float] | None] = {}
        for b in scene.bodies:
            axis = None
            if b.kind is BodyKind.CONSTRAINT_ORIENTED:
                if b.allowed_push_axis is PushAxis.X:
                    axis = (1.0, 0.0)
                elif b.allowed_push_axis is PushAxis.Y:
                    axis = (0.0, 1.0)
            self.axis_of[b.id] = axis


@lru_cache(maxsize=64)
def _cached_model(scene: "Scene") -> _Model:
    return _Model(scene)


def _pair_contact(code_a, pa, xa, ya, code_b, pb, xb, yb):
    """Contact between two dispatched shapes; returns (point, normal, depth) or None."""
    if code_a == _DISC:
        if code_b == _DISC:
            return _disc_disc(xa, ya, pa, xb, yb, pb)
        if code_b == _BOX:
            return _disc_box(xa, ya, pa, xb, yb, pb[0], pb[1])
        return _disc_polygon(xa, ya, pa, tuple((vx + xb, vy + yb) for vx, vy in pb))
    if code_a == _BOX:
        if code_b == _DISC:
            hit = _disc_box(xb, yb, pb, xa, ya, pa[0], pa[1])
            if hit is None:
                return None
            point, (nx, ny), depth = hit
            return (point, (-nx, -ny), depth)
        va = _box_verts(Box(pa[0], pa[1]), (xa, ya))
        if code_b == _BOX:
            return _box_box(xa, ya, pa[0], pa[1], xb, yb, pb[0], pb[1])
        return _poly_poly(va, tuple((vx + xb, vy + yb) for vx, vy in pb))
    # code_a == _POLY
    va = tuple((vx + xa, vy + ya) for vx, vy in pa)
    if code_b == _DISC:
        hit = _disc_polygon(xb, yb, pb, va)
        if hit is None:
            return None
        point, (nx, ny), depth = hit
        return (point, (-nx, -ny), depth)
    if code_b == _BOX:
        return _poly_poly(va, _box_verts(Box(pb[0], pb[1]), (xb, yb)))
    return _poly_poly(va, tuple((vx + xb, vy + yb) for vx, vy in pb))


def _fixed_contact(code_a, pa, xa, ya, code_f, pf, fx, fy):
    """Contact of a dynamic entity against a fixed body (polygons pre-world)."""
    if code_f == _POLY:
        if code_a == _DISC:
            return _disc_polygon(xa, ya, pa, pf)
        hit = _poly_poly(
            _box_verts(Box(pa[0], pa[1]), (xa, ya)) if code_a == _BOX
            else tuple((vx + xa, vy + ya) for vx, vy in pa),
            pf)
        return hit
    return _pair_contact(code_a, pa, xa, ya, code_f, pf, fx, fy)


def initial_state(scene: "Scene") -> WorldState:
    """World state at the scene's initial configuration, everything at rest."""
    poses = {b.id: (b.pose, (0.0, 0.0)) for b in scene.bodies if b.movable}
    return WorldState(robot_pos=scene.robot.start, robot_vel=(0.0, 0.0),
                      body_poses=poses, time=0.0)


def check_validity(state: WorldState, contacts: Iterable[ContactRecord],
                   scene: "Scene") -> tuple[bool, str | None]:
    """Apply the manipulation rules to a substep's contact set.

    Invalid when the robot or a movable body penetrates a fixed body beyond
    the contact tolerance, when the robot touches a constraint-oriented body
    on a face whose normal is more than 30 degrees off the allowed push
    axis, or when the robot center leaves the world bounds. Contact with
    freely manipulatable bodies is always allowed.
    """
    model = _cached_model(scene)
    reason = _rule_violation(state.robot_pos[0], state.robot_pos[1], contacts, model)
    return (reason is None), reason


def _rule_violation(rx: float, ry: float, contacts: Iterable[ContactRecord],
                    model: _Model) -> str | None:
    (xmin, ymin), (xmax, ymax) = model.bounds
    if rx < xmin or rx > xmax or ry < ymin or ry > ymax:
        return "robot out of bounds"
    for rec in contacts:
        kind_a = model.kind_of.get(rec.a) if rec.a != ROBOT_ID else None
        kind_b = model.kind_of.get(rec.b) if rec.b != ROBOT_ID else None
        if rec.depth > CONTACT_TOL and (kind_a is BodyKind.FIXED or kind_b is BodyKind.FIXED):
            fixed_id = rec.a if kind_a is BodyKind.FIXED else rec.b
            return f"penetrates fixed body {fixed_id!r}"
        if rec.depth >= 0.0:
            # Push-face rule applies only to robot contacts.
            if rec.a == ROBOT_ID and kind_b is BodyKind.CONSTRAINT_ORIENTED:
                axis = model.axis_of[rec.b]
                nx, ny = rec.normal
            elif rec.b == ROBOT_ID and kind_a is BodyKind.CONSTRAINT_ORIENTED:
                axis = model.axis_of[rec.a]
                nx, ny = -rec.normal[0], -rec.normal[1]
            else:
                continue
            if axis is not None and abs(nx * axis[0] + ny * axis[1]) < PUSH_FACE_COS - 1e-12:
                body = rec.b if rec.a == ROBOT_ID else rec.a
                return f"disallowed push face on {body!r}"
    return None


def propagate(state: WorldState, control: Control, scene: "Scene",
              record_contacts: bool = False) -> PropagationResult:
    """Integrate the world under one control.

    Uses a fixed substep of control_step / 10 with a symplectic velocity
    update and trapezoidal position update (exact for constant force in
    free space), restitution-free contact impulses, projection-based
    penetration correction and ground Coulomb friction. Stops at the first
    substep that violates a validity rule; `final` is then the last valid
    state and the trace carries no later entries.
    """
    model = _cached_model(scene)
    fx, fy = control.force
    if abs(fx) > model.f_max + 1e-9 or abs(fy) > model.f_max + 1e-9:
        raise ContractError(f"control force {control.force} exceeds f_max {model.f_max}")
    k = control.steps(model.control_step)
    if set(state.body_poses) != set(model.movable_ids):
        raise StructuralError("state body ids do not match the scene's movable bodies")

    h = model.h
    n_sub = k * SUBSTEPS
    n_dyn = model.n_dyn
    inv_mass = model.inv_mass
    codes = model.codes
    params = model.params
    decel = model.decel
    rel = model.rel_aabb
    fixed = model.fixed
    (bxmin, bymin), (bxmax, bymax) = (model.bounds[0], model.bounds[1])
    tol = CONTACT_TOL

    px = [state.robot_pos[0]]
    py = [state.robot_pos[1]]
    vx = [state.robot_vel[0]]
    vy = [state.robot_vel[1]]
    for bid in model.movable_ids:
        (bpx, bpy), (bvx, bvy) = state.body_poses[bid]
        px.append(bpx)
        py.append(bpy)
        vx.append(bvx)
        vy.append(bvy)

    arx = fx * inv_mass[0]
    ary = fy * inv_mass[0]
    t0 = state.time
    times = [t0]
    trace_x = [px[0]]
    trace_y = [py[0]]
    trace_vx = [vx[0]]
    trace_vy = [vy[0]]
    path_length = 0.0
    valid = True
    violation: str | None = None
    events: list[tuple[float, ContactRecord]] | None = [] if record_contacts else None
    committed = 0

    for i in range(1, n_sub + 1):
        prev = (px[:], py[:], vx[:], vy[:])
        # Integrate: applied force on the robot, then friction, then position.
        for e in range(n_dyn):
            ovx = vx[e]
            ovy = vy[e]
            nvx = ovx + (arx * h if e == 0 else 0.0)
            nvy = ovy + (ary * h if e == 0 else 0.0)
            dec = decel[e] * h
            if dec > 0.0:
                sp = math.hypot(nvx, nvy)
                if sp <= dec:
                    nvx = 0.0
                    nvy = 0.0
                else:
                    sc = 1.0 - dec / sp
                    nvx *= sc
                    nvy *= sc
            vx[e] = nvx
            vy[e] = nvy
            px[e] += 0.5 * (ovx + nvx) * h
            py[e] += 0.5 * (ovy + nvy) * h

        # Contact detection: dynamic pairs, then dynamic vs fixed.
        contacts = []  # (ia, ib, fixed_index, point, nx, ny, depth); ib = -1 when fixed
        for a in range(n_dyn):
            ra = rel[a]
            ax0 = px[a] + ra[0]
            ay0 = py[a] + ra[1]
            ax1 = px[a] + ra[2]
            ay1 = py[a] + ra[3]
            for b in range(a + 1, n_dyn):
                rb = rel[b]
                if (px[b] + rb[0] > ax1 + tol or px[b] + rb[2] < ax0 - tol
                        or py[b] + rb[1] > ay1 + tol or py[b] + rb[3] < ay0 - tol):
                    continue
                hit = _pair_contact(codes[a], params[a], px[a], py[a],
                                    codes[b], params[b], px[b], py[b])
                if hit is not None:
                    contacts.append((a, b, -1, hit[0], hit[1][0], hit[1][1], hit[2]))
            for fi, (fid, fcode, fparams, fpose, fbb) in enumerate(fixed):
                if (fbb[0] > ax1 + tol or fbb[2] < ax0 - tol
                        or fbb[1] > ay1 + tol or fbb[3] < ay0 - tol):
                    continue
                hit = _fixed_contact(codes[a], params[a], px[a], py[a],
                                     fcode, fparams, fpose[0], fpose[1])
                if hit is not None:
                    contacts.append((a, -1, fi, hit[0], hit[1][0], hit[1][1], hit[2]))

        residual = []
        if contacts:
            # Restitution-free impulse passes on the detected contact set.
            for _ in range(8):
                applied = False
                for (a, b, fi, _pt, nx, ny, depth) in contacts:
                    if depth <= 0.0:
                        continue
                    vrel = vx[a] * nx + vy[a] * ny
                    inv_b = 0.0
                    if b >= 0:
                        vrel -= vx[b] * nx + vy[b] * ny
                        inv_b = inv_mass[b]
                    if vrel < -1e-12:
                        j = -vrel / (inv_mass[a] + inv_b)
                        vx[a] += j * inv_mass[a] * nx
                        vy[a] += j * inv_mass[a] * ny
                        if b >= 0:
                            vx[b] -= j * inv_b * nx
                            vy[b] -= j * inv_b * ny
                        applied = True
                if not applied:
                    break
            # One projection pass: split the correction by inverse mass.
            for (a, b, fi, pt, nx, ny, depth) in contacts:
                corr = depth - SLOP
                if corr <= 0.0:
                    residual.append((a, b, fi, pt, nx, ny, depth))
                    continue
                if corr > MAX_CORRECTION:
                    corr = MAX_CORRECTION
                inv_b = inv_mass[b] if b >= 0 else 0.0
                inv_sum = inv_mass[a] + inv_b
                move_a = corr * inv_mass[a] / inv_sum
                px[a] += nx * move_a
                py[a] += ny * move_a
                if b >= 0:
                    move_b = corr * inv_b / inv_sum
                    px[b] -= nx * move_b
                    py[b] -= ny * move_b
                residual.append((a, b, fi, pt, nx, ny, depth - corr))

        # Validity rules on this substep's (post-resolution) contacts.
        if px[0] < bxmin or px[0] > bxmax or py[0] < bymin or py[0] > bymax:
            violation = "robot out of bounds"
        elif residual:
            records = [
                ContactRecord(
                    a=model.ids[a],
                    b=model.ids[b] if b >= 0 else fixed[fi][0],
                    normal=(nx, ny), depth=depth, point=pt)
                for (a, b, fi, pt, nx, ny, depth) in residual
            ]
            violation = _rule_violation(px[0], py[0], records, model)
            if violation is None and events is not None:
                t = t0 + i * h
                events.extend((t, rec) for rec in records)
        if violation is not None:
            valid = False
            px, py, vx, vy = prev
            break

        committed = i
        t = t0 + i * h
        times.append(t)
        path_length += math.hypot(px[0] - trace_x[-1], py[0] - trace_y[-1])
        trace_x.append(px[0])
        trace_y.append(py[0])
        trace_vx.append(vx[0])
        trace_vy.append(vy[0])

    body_poses = {
        bid: ((px[1 + j], py[1 + j]), (vx[1 + j], vy[1 + j]))
        for j, bid in enumerate(model.movable_ids)
    }
    final = WorldState(
        robot_pos=(px[0], py[0]),
        robot_vel=(vx[0], vy[0]),
        body_poses=body_poses,
        time=t0 + committed * h,
    )
    n = len(times)
    positions = np.empty((n, 2))
    positions[:, 0] = trace_x
    positions[:, 1] = trace_y
    velocities = np.empty((n, 2))
    velocities[:, 0] = trace_vx
    velocities[:, 1] = trace_vy
    return PropagationResult(
        final=final, valid=valid, violation=violation, path_length=path_length,
        times=np.asarray(times), positions=positions, velocities=velocities,
        events=events,
    )


def replay(scene: "Scene", state: WorldState, controls: Iterable[Control],
           record_contacts: bool = False) -> list[PropagationResult]:
    """Propagate a control sequence, chaining each result's final state."""
    results = []
    current = state
    for control in controls:
        res = propagate(current, control, scene, record_contacts=record_contacts)
        results.append(res)
        current = res.final
        if not res.valid:
            break
    return results


def kinetic_energy(state: WorldState, scene: "Scene") -> float:
    """Total kinetic energy of the robot and all movable bodies."""
    model = _cached_model(scene)
    vx, vy = state.robot_vel
    total = 0.5 * model.robot_mass * (vx * vx + vy * vy)
    for j, bid in enumerate(model.movable_ids):
        bvx, bvy = state.body_poses[bid][1]
        total += 0.5 * (1.0 / model.inv_mass[1 + j]) * (bvx * bvx + bvy * bvy)
    return total
