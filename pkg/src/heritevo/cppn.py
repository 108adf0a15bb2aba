"""CPPN genomes that supply CPG weights, with NEAT-style operators (no speciation).

Node ids are fixed for the interface: inputs ``x1 y1 z1 w1 x2 y2 z2 w2`` are
0..7, the bias is 8 and the single output is 9.  Hidden nodes and connection
innovation numbers come from an :class:`InnovationTracker` shared by a run.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from heritevo.controller import CpgNetwork
from heritevo.morphology import GridEmbedding

N_INPUTS = 8
BIAS = 8
OUTPUT = 9
INPUT_IDS = tuple(range(N_INPUTS))
OUTPUT_CLAMP = 3.0
MAX_RESAMPLES = 10

ACTIVATIONS = {
    "identity": lambda v: v,
    "sigmoid": expit,
    "gaussian": lambda v: np.exp(-np.square(v)),
    "sine": np.sin,
}
ACTIVATION_NAMES = tuple(ACTIVATIONS)


class CycleError(ValueError):
    pass


@dataclass
class NodeGene:
    id: int
    role: str  # input | bias | output | hidden
    activation: str = "identity"


@dataclass
class ConnGene:
    innovation: int
    source: int
    target: int
    weight: float
    enabled: bool = True


@dataclass
class CppnGenome:
    nodes: dict[int, NodeGene] = field(default_factory=dict)
    conns: dict[int, ConnGene] = field(default_factory=dict)

    @classmethod
    def bare(cls, output_activation: str = "identity") -> CppnGenome:
        g = cls()
        for i in INPUT_IDS:
            g.nodes[i] = NodeGene(i, "input")
        g.nodes[BIAS] = NodeGene(BIAS, "bias")
        g.nodes[OUTPUT] = NodeGene(OUTPUT, "output", output_activation)
        return g

    def has_edge(self, source: int, target: int) -> bool:
        return any(c.source == source and c.target == target for c in self.conns.values())

    def topological_order(self) -> list[int]:
        """Kahn order over *all* connections (disabled ones may be re-enabled later)."""
        indeg = {n: 0 for n in self.nodes}
        succ: dict[int, list[int]] = {n: [] for n in self.nodes}
        for c in self.conns.values():
            indeg[c.target] += 1
            succ[c.source].append(c.target)
        ready = sorted(n for n, d in indeg.items() if d == 0)
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for m in sorted(succ[n]):
                indeg[m] -= 1
                if indeg[m] == 0:
                    ready.append(m)
            ready.sort()
        if len(order) != len(self.nodes):
            raise CycleError("CPPN genome contains a directed cycle")
        return order

    def is_acyclic(self) -> bool:
        try:
            self.topological_order()
        except CycleError:
            return False
        return True

    def evaluate(self, inputs) -> np.ndarray:
        """Vectorised forward pass over rows of ``inputs`` (shape ``(m, 8)``)."""
        x = np.atleast_2d(np.asarray(inputs, dtype=float))
        if x.shape[1] != N_INPUTS:
            raise ValueError(f"expected {N_INPUTS} inputs per query")
        incoming: dict[int, list[ConnGene]] = {n: [] for n in self.nodes}
        for innov in sorted(self.conns):
            c = self.conns[innov]
            if c.enabled:
                incoming[c.target].append(c)
        values: dict[int, np.ndarray] = {}
        for n in self.topological_order():
            node = self.nodes[n]
            if node.role == "input":
                values[n] = x[:, n]
            elif node.role == "bias":
                values[n] = np.ones(len(x))
            else:
                total = np.zeros(len(x))
                for c in incoming[n]:
                    total = total + c.weight * values[c.source]
                values[n] = ACTIVATIONS[node.activation](total)
        return np.clip(values[OUTPUT], -OUTPUT_CLAMP, OUTPUT_CLAMP)


def eval_cppn(g: CppnGenome, inputs) -> float:
    return float(g.evaluate(np.asarray(inputs, dtype=float).reshape(1, N_INPUTS))[0])


class InnovationTracker:
    """Run-wide source of innovation numbers and hidden-node ids.

    The same (source, target) pair always maps to the same innovation, so
    matching genes line up in crossover.  Not thread-safe: keep it on the
    thread that applies operators.
    """

    def __init__(self):
        self._innovations: dict[tuple[int, int], int] = {}
        self._split_nodes: dict[int, list[int]] = {}
        self.next_innovation = 0
        self.next_node = OUTPUT + 1

    def connection(self, source: int, target: int) -> int:
        key = (source, target)
        if key not in self._innovations:
            self._innovations[key] = self.next_innovation
            self.next_innovation += 1
        return self._innovations[key]

    def split_node(self, innovation: int, taken) -> int:
        """Node id for splitting connection ``innovation``, avoiding ids in ``taken``."""
        ids = self._split_nodes.setdefault(innovation, [])
        for n in ids:
            if n not in taken:
                return n
        n = self.next_node
        self.next_node += 1
        ids.append(n)
        return n


def random_cppn(rng: np.random.Generator, tracker: InnovationTracker) -> CppnGenome:
    """Inputs and bias fully connected to the output with N(0, 1) weights."""
    g = CppnGenome.bare(ACTIVATION_NAMES[rng.integers(len(ACTIVATION_NAMES))])
    for src in INPUT_IDS + (BIAS,):
        innov = tracker.connection(src, OUTPUT)
        g.conns[innov] = ConnGene(innov, src, OUTPUT, float(rng.normal()))
    return g


@dataclass(frozen=True)
class CppnRates:
    weight: float = 0.8
    weight_sigma: float = 0.5
    add_connection: float = 0.1
    add_node: float = 0.05
    toggle: float = 0.05
    activation: float = 0.05

    @classmethod
    def zero(cls) -> CppnRates:
        return cls(0.0, 0.5, 0.0, 0.0, 0.0, 0.0)


def _reaches(g: CppnGenome, start: int, goal: int) -> bool:
    stack, seen = [start], set()
    while stack:
        n = stack.pop()
        if n == goal:
            return True
        if n in seen:
            continue
        seen.add(n)
        stack.extend(c.target for c in g.conns.values() if c.source == n)
    return False


def _add_connection(g: CppnGenome, rng, tracker: InnovationTracker) -> None:
    sources = sorted(n for n, node in g.nodes.items() if node.role != "output")
    targets = sorted(n for n, node in g.nodes.items() if node.role in ("hidden", "output"))
    for _ in range(MAX_RESAMPLES):
        src = sources[rng.integers(len(sources))]
        tgt = targets[rng.integers(len(targets))]
        if src == tgt or g.has_edge(src, tgt) or _reaches(g, tgt, src):
            continue
        innov = tracker.connection(src, tgt)
        g.conns[innov] = ConnGene(innov, src, tgt, float(rng.normal()))
        return


def _add_node(g: CppnGenome, rng, tracker: InnovationTracker) -> None:
    enabled = [i for i in sorted(g.conns) if g.conns[i].enabled]
    if not enabled:
        return
    old = g.conns[enabled[rng.integers(len(enabled))]]
    old.enabled = False
    node_id = tracker.split_node(old.innovation, g.nodes)
    g.nodes[node_id] = NodeGene(node_id, "hidden", ACTIVATION_NAMES[rng.integers(len(ACTIVATION_NAMES))])
    first = tracker.connection(old.source, node_id)
    second = tracker.connection(node_id, old.target)
    g.conns[first] = ConnGene(first, old.source, node_id, 1.0)
    g.conns[second] = ConnGene(second, node_id, old.target, old.weight)


def mutate_cppn(
    g: CppnGenome, rng: np.random.Generator, tracker: InnovationTracker, rates: CppnRates = CppnRates()
) -> CppnGenome:
    child = copy.deepcopy(g)
    if rng.random() < rates.weight:
        for innov in sorted(child.conns):
            child.conns[innov].weight += float(rng.normal(0.0, rates.weight_sigma))
    if rng.random() < rates.add_connection:
        _add_connection(child, rng, tracker)
    if rng.random() < rates.add_node:
        _add_node(child, rng, tracker)
    if rng.random() < rates.toggle and child.conns:
        keys = sorted(child.conns)
        c = child.conns[keys[rng.integers(len(keys))]]
        c.enabled = not c.enabled
    if rng.random() < rates.activation:
        ids = sorted(n for n, node in child.nodes.items() if node.role in ("hidden", "output"))
        n = ids[rng.integers(len(ids))]
        child.nodes[n].activation = ACTIVATION_NAMES[rng.integers(len(ACTIVATION_NAMES))]
    return child


def crossover_cppn(a: CppnGenome, b: CppnGenome, a_is_fitter: bool, rng: np.random.Generator) -> CppnGenome:
    """Matching genes from either parent at random, disjoint and excess genes from the fitter one."""
    fitter, other = (a, b) if a_is_fitter else (b, a)
    child = CppnGenome(nodes=copy.deepcopy(fitter.nodes))
    for innov in sorted(fitter.conns):
        gene = fitter.conns[innov]
        if innov in other.conns and rng.random() < 0.5:
            gene = other.conns[innov]
        child.conns[innov] = copy.deepcopy(gene)
    return child


# --------------------------------------------------------------------------
# substrate
# --------------------------------------------------------------------------

def substrate_coords(net: CpgNetwork, e: GridEmbedding) -> np.ndarray:
    """Joint cells scaled per axis into [-1, 1] by the body's largest extent from the core."""
    cells = np.array(net.cells, dtype=float).reshape(-1, 3)
    scale = np.abs(e.coords()).max(axis=0).astype(float)
    scale[scale == 0] = 1.0
    return cells / scale


def query_weights(g: CppnGenome, net: CpgNetwork, coords: np.ndarray) -> CpgNetwork:
    """Fill the CPG weights from CPPN queries (the x neuron has w=-1, the y neuron w=+1)."""
    n = net.n_joints
    if n == 0:
        net.set_weights([], [])
        return net
    coords = np.asarray(coords, dtype=float).reshape(n, 3)
    xn = np.hstack([coords, -np.ones((n, 1))])
    yn = np.hstack([coords, np.ones((n, 1))])
    queries = [np.hstack([xn[i], yn[i]]) for i in range(n)]
    queries += [np.hstack([xn[i], xn[j]]) for i, j in net.edges]
    out = g.evaluate(np.array(queries))
    net.set_weights(out[:n], out[n:])
    return net


# --------------------------------------------------------------------------
# text format
# --------------------------------------------------------------------------

def format_cppn(g: CppnGenome) -> str:
    lines = [f"node {n} {g.nodes[n].role} {g.nodes[n].activation}" for n in sorted(g.nodes)]
    for innov in sorted(g.conns):
        c = g.conns[innov]
        lines.append(f"conn {innov} {c.source} {c.target} {c.weight!r} {int(c.enabled)}")
    return "\n".join(lines) + "\n"


def parse_cppn(text: str) -> CppnGenome:
    g = CppnGenome()
    for raw in text.splitlines():
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "node":
            g.nodes[int(parts[1])] = NodeGene(int(parts[1]), parts[2], parts[3])
        elif parts[0] == "conn":
            innov = int(parts[1])
            g.conns[innov] = ConnGene(innov, int(parts[2]), int(parts[3]), float(parts[4]), parts[5] == "1")
        else:
            raise ValueError(f"unknown line: {raw!r}")
    g.topological_order()
    return g
