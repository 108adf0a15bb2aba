"""Robot modules, body trees and their embedding into the integer grid.

A body is a tree of :class:`Module` nodes rooted at the single Core.  Every
module is addressed by its *path*: the tuple of slot indices walked from the
core, so the core is ``()`` and a brick on the core's front slot is ``(0,)``.
Paths are plain values, which keeps embeddings comparable with ``==``.

Slot layout (directions are in the parent's local frame, +y is "front"):

======  =====================================
kind    slots
======  =====================================
Core    0 front, 1 right, 2 back, 3 left
Brick   0 left, 1 front, 2 right
Joint   0 front
======  =====================================
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

Path = tuple[int, ...]
Cell = tuple[int, int, int]


class ModuleKind(str, enum.Enum):
    CORE = "Core"
    BRICK = "Brick"
    JOINT = "Joint"


SLOT_NAMES: dict[ModuleKind, tuple[str, ...]] = {
    ModuleKind.CORE: ("front", "right", "back", "left"),
    ModuleKind.BRICK: ("left", "front", "right"),
    ModuleKind.JOINT: ("front",),
}

DIRECTIONS: dict[str, tuple[int, int, int]] = {
    "front": (0, 1, 0),
    "right": (1, 0, 0),
    "back": (0, -1, 0),
    "left": (-1, 0, 0),
}

# yaw (degrees) that turns a child's local +y onto the slot direction
_SLOT_YAW = {"front": 0, "right": -90, "back": 180, "left": 90}

ROTATIONS = (0, 90)


def slot_count(kind: ModuleKind) -> int:
    return len(SLOT_NAMES[kind])


def slot_index(kind: ModuleKind, name: str) -> int | None:
    """Index of the slot called ``name`` on ``kind``, or None if it has none."""
    try:
        return SLOT_NAMES[kind].index(name)
    except ValueError:
        return None


def rot_z(degrees: float) -> np.ndarray:
    a = np.radians(degrees)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(degrees: float) -> np.ndarray:
    a = np.radians(degrees)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def attachment_rotation(parent_kind: ModuleKind, slot: int, rotation: int) -> np.ndarray:
    """Rotation of a child's frame relative to its parent's frame.

    The child faces away from the parent along the slot direction; a 90
    degree attachment additionally turns it about that attachment axis.
    """
    name = SLOT_NAMES[parent_kind][slot]
    return rot_z(_SLOT_YAW[name]) @ rot_y(rotation)


def slot_vector(parent_kind: ModuleKind, slot: int) -> np.ndarray:
    return np.array(DIRECTIONS[SLOT_NAMES[parent_kind][slot]], dtype=float)


@dataclass
class Module:
    kind: ModuleKind
    rotation: int = 0
    children: dict[int, Module] = field(default_factory=dict)


@dataclass
class BodyGraph:
    root: Module = field(default_factory=lambda: Module(ModuleKind.CORE))

    def walk(self) -> Iterator[tuple[Path, Module, Module | None]]:
        """Breadth-first (path, module, parent) triples, children in slot order."""
        return walk(self.root)

    def module_at(self, path: Path) -> Module:
        node = self.root
        for slot in path:
            node = node.children[slot]
        return node


def walk(root) -> Iterator[tuple[Path, object, object | None]]:
    # works for any node type exposing a ``children`` slot dict
    queue = deque([((), root, None)])
    while queue:
        path, node, parent = queue.popleft()
        yield path, node, parent
        for slot in sorted(node.children):
            queue.append((path + (slot,), node.children[slot], node))


def count_modules(body: BodyGraph) -> int:
    return sum(1 for _ in body.walk())


def count_leaves(body: BodyGraph) -> int:
    """Leaf modules of the tree; the core alone is not a limb."""
    return sum(1 for path, node, _ in body.walk() if path and not node.children)


def max_leaves(n_modules: int) -> int:
    """Largest leaf count any valid body with ``n_modules`` modules can have.

    Leaves = modules - internal nodes, and the cheapest internal structure is
    the core (4 children) plus bricks (3 children each), so the minimum number
    of internal nodes ``i`` satisfies ``3 i + 1 >= n_modules - 1``.
    """
    if n_modules <= 1:
        return 0
    internal = max(1, -(-(n_modules - 2) // 3))
    return n_modules - internal


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BodyLimits:
    max_modules: int = 30
    no_joint_on_joint: bool = True


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(body: BodyGraph, limits: BodyLimits = BodyLimits()) -> ValidationReport:
    report = ValidationReport()
    if body.root.kind is not ModuleKind.CORE:
        report.violations.append("root is not a Core")
    n = 0
    for path, node, parent in body.walk():
        n += 1
        if path and node.kind is ModuleKind.CORE:
            report.violations.append(f"extra Core at {path}")
        if node.rotation not in ROTATIONS:
            report.violations.append(f"bad rotation {node.rotation} at {path}")
        for slot in node.children:
            if not 0 <= slot < slot_count(node.kind):
                report.violations.append(f"slot {slot} out of range for {node.kind.value} at {path}")
        if (
            limits.no_joint_on_joint
            and parent is not None
            and node.kind is ModuleKind.JOINT
            and parent.kind is ModuleKind.JOINT
        ):
            report.violations.append(f"joint attached to joint at {path}")
    if n > limits.max_modules:
        report.violations.append(f"module cap exceeded ({n} > {limits.max_modules})")
    return report


# --------------------------------------------------------------------------
# grid embedding
# --------------------------------------------------------------------------

Frame = tuple[tuple[int, int, int], ...]


def _as_frame(m: np.ndarray) -> Frame:
    return tuple(tuple(int(v) for v in row) for row in np.rint(m))


@dataclass(frozen=True)
class GridEmbedding:
    """Modules placed on integer cells; colliding subtrees are listed in ``omitted``."""

    placement: dict[Path, Cell]
    frames: dict[Path, Frame]
    kinds: dict[Path, ModuleKind]
    omitted: tuple[Path, ...] = ()

    @property
    def cells(self) -> dict[Cell, Path]:
        return {cell: path for path, cell in self.placement.items()}

    def __len__(self) -> int:
        return len(self.placement)

    def joints(self) -> list[Path]:
        """Embedded joints in breadth-first order; this fixes controller node order."""
        return [p for p in self.placement if self.kinds[p] is ModuleKind.JOINT]

    def coords(self) -> np.ndarray:
        return np.array(list(self.placement.values()), dtype=int).reshape(-1, 3)


def embed(body: BodyGraph) -> GridEmbedding:
    placement: dict[Path, Cell] = {}
    frames: dict[Path, Frame] = {}
    kinds: dict[Path, ModuleKind] = {}
    occupied: set[Cell] = set()
    omitted: list[Path] = []

    queue = deque([((), body.root, np.zeros(3), np.eye(3))])
    while queue:
        path, node, pos, frame = queue.popleft()
        cell = tuple(int(v) for v in np.rint(pos))
        if cell in occupied:
            # everything below a collision is dropped with it
            omitted.extend(p for p, _, _ in _walk_from(path, node))
            continue
        occupied.add(cell)
        placement[path] = cell
        frames[path] = _as_frame(frame)
        kinds[path] = node.kind
        for slot in sorted(node.children):
            child = node.children[slot]
            child_pos = pos + frame @ slot_vector(node.kind, slot)
            child_frame = frame @ attachment_rotation(node.kind, slot, child.rotation)
            queue.append((path + (slot,), child, child_pos, child_frame))
    return GridEmbedding(placement, frames, kinds, tuple(omitted))


def _walk_from(path: Path, node: Module):
    for sub, n, parent in walk(node):
        yield path + sub, n, parent


# --------------------------------------------------------------------------
# text format
# --------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z]+)|(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(?P<punct>[()\[\]:;,]))")


class ParseError(ValueError):
    pass


def _tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        tokens.append(m.group(0).strip())
        pos = m.end()
    return tokens


def parse_tree(text: str) -> tuple:
    """Parse the nested text format into ``(kind, rotation, params, {slot: subtree})``.

    ``params`` is an empty tuple unless the node carries ``; f, off, amp``.
    """
    tokens = _tokenize(text)
    pos = 0

    def expect(tok):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != tok:
            got = tokens[pos] if pos < len(tokens) else "end of input"
            raise ParseError(f"expected {tok!r}, got {got!r}")
        pos += 1

    def node():
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of input")
        try:
            kind = ModuleKind(tokens[pos])
        except ValueError:
            raise ParseError(f"unknown module kind {tokens[pos]!r}") from None
        pos += 1
        expect("(")
        rotation = int(tokens[pos])
        pos += 1
        params: tuple[float, ...] = ()
        if tokens[pos] == ";":
            pos += 1
            values = [float(tokens[pos])]
            pos += 1
            while tokens[pos] == ",":
                values.append(float(tokens[pos + 1]))
                pos += 2
            params = tuple(values)
        expect(")")
        children = {}
        if pos < len(tokens) and tokens[pos] == "[":
            pos += 1
            while True:
                slot = int(tokens[pos])
                pos += 1
                expect(":")
                if slot in children:
                    raise ParseError(f"slot {slot} used twice")
                children[slot] = node()
                if tokens[pos] == ",":
                    pos += 1
                    continue
                expect("]")
                break
        return kind, rotation, params, children

    try:
        tree = node()
    except IndexError:
        raise ParseError("unexpected end of input") from None
    if pos != len(tokens):
        raise ParseError(f"trailing input: {' '.join(tokens[pos:])}")
    return tree


def format_node(kind: ModuleKind, rotation: int, params, children: dict, fmt_child) -> str:
    head = f"{kind.value}({rotation}"
    if params:
        head += "; " + ", ".join(repr(float(p)) for p in params)
    head += ")"
    if children:
        inner = ", ".join(f"{slot}: {fmt_child(children[slot])}" for slot in sorted(children))
        head += f"[{inner}]"
    return head


def format_body(body: BodyGraph) -> str:
    def fmt(m: Module) -> str:
        return format_node(m.kind, m.rotation, (), m.children, fmt)

    return fmt(body.root)


def parse_body(text: str) -> BodyGraph:
    def build(tree) -> Module:
        kind, rotation, _, children = tree
        return Module(kind, rotation, {s: build(c) for s, c in children.items()})

    return BodyGraph(build(parse_tree(text)))
