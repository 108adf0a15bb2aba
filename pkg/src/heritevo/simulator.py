"""Deterministic surrogate for the physics engine.

This is an anchor-drag kinematic model, not a physics replica.  Every control
step:

1. joint angles are set from the controller (output +-1 maps to +-90 deg) and
   module centres are placed by forward kinematics in the core frame;
2. the body is tipped about its support polygon until the centre of mass
   (mean module position) is above it, which fixes roll and pitch;
3. the contact set is every module within ``CONTACT_TOL`` cells of the lowest
   one, and the planar pose (x, y, yaw) is updated by the least-squares rigid
   2D transform that keeps those contact points where they were on the ground.

Nothing is random: the same body, controller and config always give the same
trajectory.  Distances are in cells internally and in cm (``CELL_SIZE``) in
the returned trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from heritevo.morphology import BodyGraph, GridEmbedding, ModuleKind, attachment_rotation, embed, slot_vector
from heritevo.traits import Trajectory

CELL_SIZE = 4.0  # cm
CONTACT_TOL = 0.1  # cells
MAX_TIP_ITERATIONS = 4
_EPS = 1e-9


@dataclass(frozen=True)
class SimConfig:
    duration: float = 30.0
    timestep: float = 0.005
    sample_period: float = 0.1

    def __post_init__(self):
        if self.duration <= 0 or self.timestep <= 0 or self.sample_period <= 0:
            raise ValueError("durations must be positive")
        if self.timestep > self.sample_period:
            raise ValueError("timestep must not exceed the sample period")
        for name, ratio in (("duration/sample_period", self.duration / self.sample_period),
                            ("sample_period/timestep", self.sample_period / self.timestep)):
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(f"{name} must be integral, got {ratio}")

    @property
    def n_samples(self) -> int:
        return round(self.duration / self.sample_period) + 1

    @property
    def steps_per_sample(self) -> int:
        return round(self.sample_period / self.timestep)

    @property
    def n_steps(self) -> int:
        return (self.n_samples - 1) * self.steps_per_sample


# --------------------------------------------------------------------------
# kernel
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def _forward_kinematics(parent, offset, rrel, jcol, angles_row, pos, rot):
    n = parent.shape[0]
    pos[0, :] = 0.0
    rot[0] = np.eye(3)
    rout = np.empty((3, 3))
    for i in range(1, n):
        p = parent[i]
        if jcol[p] >= 0:
            a = angles_row[jcol[p]]
            c = math.cos(a)
            s = math.sin(a)
            # hinge about the joint's local z axis
            for r in range(3):
                rout[r, 0] = rot[p, r, 0] * c + rot[p, r, 1] * s
                rout[r, 1] = -rot[p, r, 0] * s + rot[p, r, 1] * c
                rout[r, 2] = rot[p, r, 2]
        else:
            rout[:, :] = rot[p]
        for r in range(3):
            pos[i, r] = pos[p, r] + rout[r, 0] * offset[i, 0] + rout[r, 1] * offset[i, 1] + rout[r, 2] * offset[i, 2]
        rot[i] = rout @ rrel[i]


@numba.njit(cache=True)
def _hull(xs, ys):
    """Monotone-chain convex hull, counter-clockwise, no repeated end point."""
    m = xs.shape[0]
    order = np.arange(m)
    for i in range(1, m):  # insertion sort by (x, y); m is tiny
        k = order[i]
        j = i - 1
        while j >= 0 and (xs[order[j]] > xs[k] or (xs[order[j]] == xs[k] and ys[order[j]] > ys[k])):
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = k
    hx = np.empty(2 * m + 1)
    hy = np.empty(2 * m + 1)
    k = 0
    for idx in range(m):
        i = order[idx]
        while k >= 2 and (hx[k - 1] - hx[k - 2]) * (ys[i] - hy[k - 2]) - (hy[k - 1] - hy[k - 2]) * (xs[i] - hx[k - 2]) <= _EPS:
            k -= 1
        hx[k] = xs[i]
        hy[k] = ys[i]
        k += 1
    lower = k + 1
    for idx in range(m - 2, -1, -1):
        i = order[idx]
        while k >= lower and (hx[k - 1] - hx[k - 2]) * (ys[i] - hy[k - 2]) - (hy[k - 1] - hy[k - 2]) * (xs[i] - hx[k - 2]) <= _EPS:
            k -= 1
        hx[k] = xs[i]
        hy[k] = ys[i]
        k += 1
    if m > 1:
        k -= 1
    # collapse coincident points (all contacts on one spot)
    if k == 2 and abs(hx[0] - hx[1]) < _EPS and abs(hy[0] - hy[1]) < _EPS:
        k = 1
    return hx[:k].copy(), hy[:k].copy()


@numba.njit(cache=True)
def _closest_on_hull(hx, hy, px, py):
    """Return (inside, qx, qy): whether (px, py) is in the hull and its closest boundary point."""
    k = hx.shape[0]
    if k == 1:
        d = math.hypot(px - hx[0], py - hy[0])
        return d <= _EPS, hx[0], hy[0]
    inside = k >= 3
    best = 1e300
    qx = hx[0]
    qy = hy[0]
    n_edges = k if k >= 3 else 1
    for e in range(n_edges):
        ax, ay = hx[e], hy[e]
        bx, by = hx[(e + 1) % k], hy[(e + 1) % k]
        ex, ey = bx - ax, by - ay
        if inside and ex * (py - ay) - ey * (px - ax) < -_EPS:
            inside = False
        ll = ex * ex + ey * ey
        t = ((px - ax) * ex + (py - ay) * ey) / ll
        t = min(1.0, max(0.0, t))
        cx, cy = ax + t * ex, ay + t * ey
        d = math.hypot(px - cx, py - cy)
        if d < best:
            best = d
            qx, qy = cx, cy
    if best <= _EPS:
        inside = True
    return inside, qx, qy


@numba.njit(cache=True)
def _settle(pts, tol):
    """Tip the posture ``pts`` onto its support; returns (tilted points, tilt rotation)."""
    n = pts.shape[0]
    q = pts.copy()
    tilt = np.eye(3)
    for _ in range(MAX_TIP_ITERATIONS):
        zmin = q[:, 2].min()
        m = 0
        for i in range(n):
            if q[i, 2] <= zmin + tol:
                m += 1
        cx_ = np.empty(m)
        cy_ = np.empty(m)
        j = 0
        for i in range(n):
            if q[i, 2] <= zmin + tol:
                cx_[j] = q[i, 0]
                cy_[j] = q[i, 1]
                j += 1
        comx = q[:, 0].mean()
        comy = q[:, 1].mean()
        hx, hy = _hull(cx_, cy_)
        inside, px, py = _closest_on_hull(hx, hy, comx, comy)
        if inside:
            break
        dist = math.hypot(comx - px, comy - py)
        ux = (comx - px) / dist
        uy = (comy - py) / dist
        beta = 10.0
        for i in range(n):
            if q[i, 2] <= zmin + tol:
                continue
            du = (q[i, 0] - px) * ux + (q[i, 1] - py) * uy
            if du > _EPS:
                b = math.atan2(q[i, 2] - zmin, du)
                if b < beta:
                    beta = b
        if beta > 5.0:
            break
        # rotation by beta about the horizontal axis k = z x u (Rodrigues)
        kx, ky = -uy, ux
        c = math.cos(beta)
        s = math.sin(beta)
        r = np.empty((3, 3))
        r[0, 0] = c + kx * kx * (1 - c)
        r[0, 1] = kx * ky * (1 - c)
        r[0, 2] = ky * s
        r[1, 0] = ky * kx * (1 - c)
        r[1, 1] = c + ky * ky * (1 - c)
        r[1, 2] = -kx * s
        r[2, 0] = -ky * s
        r[2, 1] = kx * s
        r[2, 2] = c
        for i in range(n):
            dx = q[i, 0] - px
            dy = q[i, 1] - py
            dz = q[i, 2] - zmin
            q[i, 0] = px + r[0, 0] * dx + r[0, 1] * dy + r[0, 2] * dz
            q[i, 1] = py + r[1, 0] * dx + r[1, 1] * dy + r[1, 2] * dz
            q[i, 2] = zmin + r[2, 0] * dx + r[2, 1] * dy + r[2, 2] * dz
        tilt = r @ tilt
    return q, tilt


@numba.njit(cache=True)
def _run(parent, offset, rrel, jcol, angles, steps_per_sample, n_samples, tol):
    n = parent.shape[0]
    out = np.zeros((n_samples, 6))
    pos = np.zeros((n, 3))
    rot = np.zeros((n, 3, 3))
    prev = np.zeros((n, 3))
    px = 0.0
    py = 0.0
    psi = 0.0
    n_steps = (n_samples - 1) * steps_per_sample
    for t in range(n_steps + 1):
        _forward_kinematics(parent, offset, rrel, jcol, angles[t], pos, rot)
        q, tilt = _settle(pos, tol)
        zmin = q[:, 2].min()
        if t > 0:
            # rigid 2D fit mapping current contact points onto their previous spots
            m = 0
            ax = 0.0
            ay = 0.0
            bx = 0.0
            by = 0.0
            for i in range(n):
                if q[i, 2] <= zmin + tol:
                    m += 1
                    ax += prev[i, 0]
                    ay += prev[i, 1]
                    bx += q[i, 0]
                    by += q[i, 1]
            ax /= m
            ay /= m
            bx /= m
            by /= m
            sc = 0.0
            sd = 0.0
            for i in range(n):
                if q[i, 2] <= zmin + tol:
                    ux = q[i, 0] - bx
                    uy = q[i, 1] - by
                    vx = prev[i, 0] - ax
                    vy = prev[i, 1] - ay
                    sc += ux * vy - uy * vx
                    sd += ux * vx + uy * vy
            theta = math.atan2(sc, sd)
            ct = math.cos(theta)
            st = math.sin(theta)
            tx = ax - (ct * bx - st * by)
            ty = ay - (st * bx + ct * by)
            cp = math.cos(psi)
            sp = math.sin(psi)
            px += cp * tx - sp * ty
            py += sp * tx + cp * ty
            psi += theta
        prev[:, :] = q
        if t % steps_per_sample == 0:
            k = t // steps_per_sample
            cp = math.cos(psi)
            sp = math.sin(psi)
            out[k, 0] = px + cp * q[0, 0] - sp * q[0, 1]
            out[k, 1] = py + sp * q[0, 0] + cp * q[0, 1]
            out[k, 2] = q[0, 2] - zmin
            # core orientation = Rz(psi) @ tilt
            m20 = tilt[2, 0]
            m21 = tilt[2, 1]
            m22 = tilt[2, 2]
            m00 = cp * tilt[0, 0] - sp * tilt[1, 0]
            m10 = sp * tilt[0, 0] + cp * tilt[1, 0]
            out[k, 3] = math.degrees(math.atan2(m21, m22))
            out[k, 4] = math.degrees(math.asin(min(1.0, max(-1.0, -m20))))
            out[k, 5] = math.degrees(math.atan2(m10, m00))
    return out


# --------------------------------------------------------------------------
# python side
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Kinematics:
    """Flattened body for the kernel; index 0 is the core, parents precede children."""

    paths: list
    parent: np.ndarray
    offset: np.ndarray
    rrel: np.ndarray
    is_joint: np.ndarray


def kinematic_chain(body: BodyGraph, e: GridEmbedding | None = None) -> Kinematics:
    e = e if e is not None else embed(body)
    paths = list(e.placement)  # breadth-first, only embedded modules
    index = {p: i for i, p in enumerate(paths)}
    n = len(paths)
    parent = np.full(n, -1, dtype=np.int64)
    offset = np.zeros((n, 3))
    rrel = np.zeros((n, 3, 3))
    rrel[0] = np.eye(3)
    for i, path in enumerate(paths[1:], start=1):
        parent_path, slot = path[:-1], path[-1]
        parent_kind = e.kinds[parent_path]
        parent[i] = index[parent_path]
        offset[i] = slot_vector(parent_kind, slot)
        rrel[i] = attachment_rotation(parent_kind, slot, body.module_at(path).rotation)
    is_joint = np.array([e.kinds[p] is ModuleKind.JOINT for p in paths])
    return Kinematics(paths, parent, offset, rrel, is_joint)


def joint_angles(chain: Kinematics, controller, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-step joint angles (radians) and the module -> angle-column map."""
    jcol = np.full(len(chain.paths), -1, dtype=np.int64)
    columns = {p: k for k, p in enumerate(controller.joints)} if controller is not None else {}
    for i, p in enumerate(chain.paths):
        if chain.is_joint[i] and p in columns:
            jcol[i] = columns[p]
    n_cols = len(columns)
    if n_cols == 0:
        return np.zeros((cfg.n_steps + 1, 1)), jcol
    outputs = controller.output_series(cfg.n_steps, cfg.timestep)
    return np.ascontiguousarray(outputs * (np.pi / 2.0)), jcol


def simulate(body: BodyGraph, controller, cfg: SimConfig = SimConfig(), start=(0.0, 0.0)) -> Trajectory:
    """Run ``body`` driven by ``controller`` on the flat plane and return the core trajectory."""
    chain = kinematic_chain(body)
    angles, jcol = joint_angles(chain, controller, cfg)
    used = np.unique(jcol[jcol >= 0])
    if len(used) == 0 or not np.any(angles[:, used]):
        # nothing moves: one posture is the whole run
        angles = np.zeros((1, max(1, angles.shape[1])))
        raw = _run(chain.parent, chain.offset, chain.rrel, jcol, angles, 1, 1, CONTACT_TOL)
        raw = np.repeat(raw, cfg.n_samples, axis=0)
    else:
        raw = _run(chain.parent, chain.offset, chain.rrel, jcol, angles,
                   cfg.steps_per_sample, cfg.n_samples, CONTACT_TOL)
    positions = raw[:, :3] * CELL_SIZE
    positions[:, 0] += start[0]
    positions[:, 1] += start[1]
    return Trajectory(cfg.sample_period, positions, raw[:, 3:].copy())
