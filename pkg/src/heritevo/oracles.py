"""Slow, independent re-implementations used to cross-check the fast code paths.

Nothing here imports the embedding or trait functions it is meant to check;
the geometry is redone with integer forward/up vectors instead of rotation
matrices, and the limb normaliser is found by exhaustive enumeration.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import product

from heritevo.morphology import BodyGraph, ModuleKind

_ARITY = {ModuleKind.CORE: 4, ModuleKind.BRICK: 3, ModuleKind.JOINT: 1}


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _neg(a):
    return (-a[0], -a[1], -a[2])


def _add(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def _slot_direction(kind: ModuleKind, slot: int, forward, up):
    right = _cross(forward, up)
    if kind is ModuleKind.CORE:
        return (forward, right, _neg(forward), _neg(right))[slot]
    if kind is ModuleKind.BRICK:
        return (_neg(right), forward, right)[slot]
    return forward


def oracle_cells(body: BodyGraph) -> tuple[dict, int]:
    """Map path -> cell plus the omitted-module count, first-come-first-served in BFS order."""
    placed: dict = {}
    taken: set = set()
    omitted = 0
    level = [((), body.root, (0, 0, 0), (0, 1, 0), (0, 0, 1))]
    while level:
        nxt = []
        for path, node, cell, forward, up in level:
            if cell in taken:
                omitted += _size(node)
                continue
            taken.add(cell)
            placed[path] = cell
            for slot in sorted(node.children):
                child = node.children[slot]
                d = _slot_direction(node.kind, slot, forward, up)
                child_up = _cross(d, up) if child.rotation == 90 else up
                nxt.append((path + (slot,), child, _add(cell, d), d, child_up))
        level = nxt
    return placed, omitted


def _size(node) -> int:
    return 1 + sum(_size(c) for c in node.children.values())


def oracle_size(body: BodyGraph) -> int:
    return _size(body.root)


def _leaves(node, is_root=True) -> int:
    if not node.children:
        return 0 if is_root else 1
    return sum(_leaves(c, False) for c in node.children.values())


def oracle_proportion(cells) -> float:
    xs = sorted({c[0] for c in cells})
    ys = sorted({c[1] for c in cells})
    w = xs[-1] - xs[0] + 1
    h = ys[-1] - ys[0] + 1
    return min(w, h) / max(w, h)


def oracle_coverage(cells) -> float:
    cells = set(cells)
    lo = [min(c[k] for c in cells) for k in range(3)]
    hi = [max(c[k] for c in cells) for k in range(3)]
    total = occupied = 0
    for cell in product(*(range(lo[k], hi[k] + 1) for k in range(3))):
        total += 1
        occupied += cell in cells
    return occupied / total


@lru_cache(maxsize=None)
def _achievable(kind: ModuleKind, n: int, joint_on_joint: bool) -> frozenset:
    """Every leaf count a subtree of ``n`` modules rooted at ``kind`` can have."""
    if n == 1:
        return frozenset({1})
    out = set()
    child_kinds = [ModuleKind.BRICK, ModuleKind.JOINT]
    if kind is ModuleKind.JOINT and not joint_on_joint:
        child_kinds = [ModuleKind.BRICK]
    for parts in _compositions(n - 1, _ARITY[kind]):
        options = [
            set().union(*(_achievable(k, p, joint_on_joint) for k in child_kinds)) for p in parts
        ]
        for combo in product(*options):
            out.add(sum(combo))
    return frozenset(out)


def _compositions(total: int, max_parts: int):
    """Non-increasing partitions of ``total`` into at most ``max_parts`` positive parts."""
    def rec(remaining, parts_left, cap):
        if remaining == 0:
            yield ()
            return
        if parts_left == 0:
            return
        for first in range(min(remaining, cap), 0, -1):
            for rest in rec(remaining - first, parts_left - 1, first):
                yield (first,) + rest
    yield from rec(total, max_parts, total)


def oracle_max_leaves(n_modules: int, joint_on_joint: bool = False) -> int:
    """Exhaustive maximum over all valid tree shapes (slot labels cannot change leaf counts)."""
    if n_modules <= 1:
        return 0
    return max(_achievable(ModuleKind.CORE, n_modules, joint_on_joint))


def oracle_limbs(body: BodyGraph) -> float:
    n = oracle_size(body)
    if n <= 1:
        return 0.0
    return _leaves(body.root) / oracle_max_leaves(n)


def oracle_morphology(body: BodyGraph) -> dict:
    placed, _ = oracle_cells(body)
    cells = list(placed.values())
    return {
        "proportion": oracle_proportion(cells),
        "size": oracle_size(body),
        "limbs": oracle_limbs(body),
        "coverage": oracle_coverage(cells),
    }


def oracle_speed(positions, duration: float) -> float:
    dx = positions[-1][0] - positions[0][0]
    dy = positions[-1][1] - positions[0][1]
    return math.sqrt(dx * dx + dy * dy) / duration


def oracle_balance(orientations) -> float:
    total = 0.0
    for roll, pitch, _ in orientations:
        for a in (roll, pitch):
            a = math.fmod(a, 360.0)
            if a > 180.0:
                a -= 360.0
            elif a < -180.0:
                a += 360.0
            total += abs(a)
    return 1.0 - total / (360.0 * len(orientations))
