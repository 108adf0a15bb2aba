"""Direct encoding: the genotype is the module tree plus per-joint oscillator parameters."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from heritevo.controller import PARAM_RANGES, SineOscillatorBrain
from heritevo.morphology import (
    BodyGraph,
    BodyLimits,
    Module,
    ModuleKind,
    format_node,
    parse_tree,
    slot_count,
    walk,
)

BODY_OPERATORS = ("add", "delete", "duplicate", "swap")
MAX_RESAMPLES = 10


def per_operator_rate(aggregate: float, n_operators: int = len(BODY_OPERATORS)) -> float:
    """Rate r such that n independent operators fire at least once with probability ``aggregate``."""
    return 1.0 - (1.0 - aggregate) ** (1.0 / n_operators)


@dataclass
class Gene:
    kind: ModuleKind
    rotation: int = 0
    children: dict[int, Gene] = field(default_factory=dict)
    params: tuple[float, float, float] | None = None
    # provenance label, carried through copies; never affects the phenotype
    origin: str | None = None


@dataclass
class TreeGenotype:
    root: Gene = field(default_factory=lambda: Gene(ModuleKind.CORE))

    def walk(self):
        return walk(self.root)

    def __len__(self) -> int:
        return sum(1 for _ in self.walk())


@dataclass(frozen=True)
class TreeRates:
    add: float = per_operator_rate(0.59)
    delete: float = per_operator_rate(0.59)
    duplicate: float = per_operator_rate(0.59)
    swap: float = per_operator_rate(0.59)
    param: float = 0.2
    param_sigma: float = 0.1  # fraction of each parameter's range

    @classmethod
    def from_aggregate(cls, aggregate: float, **kw) -> TreeRates:
        r = per_operator_rate(aggregate)
        return cls(add=r, delete=r, duplicate=r, swap=r, **kw)

    @classmethod
    def zero(cls) -> TreeRates:
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)


def random_params(rng: np.random.Generator) -> tuple[float, float, float]:
    return tuple(float(rng.uniform(lo, hi)) for lo, hi in PARAM_RANGES)


def _allowed_kinds(parent: Gene, limits: BodyLimits) -> list[ModuleKind]:
    if limits.no_joint_on_joint and parent.kind is ModuleKind.JOINT:
        return [ModuleKind.BRICK]
    return [ModuleKind.BRICK, ModuleKind.JOINT]


def _random_gene(rng: np.random.Generator, parent: Gene, limits: BodyLimits) -> Gene:
    kinds = _allowed_kinds(parent, limits)
    kind = kinds[rng.integers(len(kinds))]
    rotation = (0, 90)[rng.integers(2)]
    params = random_params(rng) if kind is ModuleKind.JOINT else None
    return Gene(kind, rotation, params=params)


def _nodes(g: TreeGenotype) -> list[tuple[tuple, Gene, Gene | None]]:
    return list(g.walk())


def _open_slots(g: TreeGenotype, max_depth: int | None = None) -> list[tuple[Gene, int]]:
    slots = []
    for path, node, _ in g.walk():
        if max_depth is not None and len(path) >= max_depth:
            continue
        for s in range(slot_count(node.kind)):
            if s not in node.children:
                slots.append((node, s))
    return slots


def _compatible(parent: Gene, child: Gene, limits: BodyLimits) -> bool:
    return not (
        limits.no_joint_on_joint and parent.kind is ModuleKind.JOINT and child.kind is ModuleKind.JOINT
    )


def truncate(g: TreeGenotype, cap: int) -> TreeGenotype:
    """Keep the first ``cap`` modules in breadth-first order, in place."""
    kept = 0
    for _, node, _ in g.walk():
        kept += 1
        if kept >= cap:
            break
    if kept < cap:
        return g
    keep = set()
    for i, (path, _, _) in enumerate(g.walk()):
        if i >= cap:
            break
        keep.add(path)
    for path, node, _ in list(g.walk()):
        if path in keep:
            for slot in list(node.children):
                if path + (slot,) not in keep:
                    del node.children[slot]
    return g


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------

def random_tree(
    rng: np.random.Generator,
    limits: BodyLimits = BodyLimits(),
    init_max_modules: int = 15,
    max_depth: int = 6,
) -> TreeGenotype:
    g = TreeGenotype()
    target = int(rng.integers(1, max(1, min(limits.max_modules, init_max_modules)) + 1))
    size = 1
    while size < target:
        slots = _open_slots(g, max_depth)
        if not slots:
            break
        parent, slot = slots[rng.integers(len(slots))]
        parent.children[slot] = _random_gene(rng, parent, limits)
        size += 1
    return g


def _op_add(g, rng, limits) -> None:
    if len(g) >= limits.max_modules:
        return
    slots = _open_slots(g)
    if not slots:
        return
    parent, slot = slots[rng.integers(len(slots))]
    parent.children[slot] = _random_gene(rng, parent, limits)


def _op_delete(g, rng, limits) -> None:
    nodes = _nodes(g)[1:]
    if not nodes:
        return
    path, _, parent = nodes[rng.integers(len(nodes))]
    del parent.children[path[-1]]


def _op_duplicate(g, rng, limits) -> None:
    nodes = _nodes(g)[1:]
    if not nodes:
        return
    _, node, _ = nodes[rng.integers(len(nodes))]
    dup = copy.deepcopy(node)
    slots = [(p, s) for p, s in _open_slots(g) if _compatible(p, dup, limits)]
    if not slots:
        return
    parent, slot = slots[rng.integers(len(slots))]
    parent.children[slot] = dup
    truncate(g, limits.max_modules)


def _op_swap(g, rng, limits) -> None:
    nodes = _nodes(g)[1:]
    if len(nodes) < 2:
        return
    for _ in range(MAX_RESAMPLES):
        i, j = rng.choice(len(nodes), size=2, replace=False)
        (pa, a, par_a), (pb, b, par_b) = nodes[i], nodes[j]
        if pa[: len(pb)] == pb or pb[: len(pa)] == pa:
            continue  # one contains the other
        if not (_compatible(par_a, b, limits) and _compatible(par_b, a, limits)):
            continue
        par_a.children[pa[-1]], par_b.children[pb[-1]] = b, a
        return


def _op_params(g, rng, rates: TreeRates) -> bool:
    changed = False
    for _, node, _ in g.walk():
        if node.kind is not ModuleKind.JOINT or rng.random() >= rates.param:
            continue
        new = []
        for value, (lo, hi) in zip(node.params, PARAM_RANGES):
            step = rng.normal(0.0, rates.param_sigma * (hi - lo))
            new.append(float(min(hi, max(lo, value + step))))
        node.params = tuple(new)
        changed = True
    return changed


_BODY_OPS = {"add": _op_add, "delete": _op_delete, "duplicate": _op_duplicate, "swap": _op_swap}


def mutate_tree_logged(
    g: TreeGenotype, rng: np.random.Generator, rates: TreeRates = TreeRates(), limits: BodyLimits = BodyLimits()
) -> tuple[TreeGenotype, list[str]]:
    """Mutate a copy of ``g``; also return the names of the operators that fired."""
    child = copy.deepcopy(g)
    fired = []
    for name in BODY_OPERATORS:
        if rng.random() < getattr(rates, name):
            _BODY_OPS[name](child, rng, limits)
            fired.append(name)
    if _op_params(child, rng, rates):
        fired.append("param")
    return child, fired


def mutate_tree(
    g: TreeGenotype, rng: np.random.Generator, rates: TreeRates = TreeRates(), limits: BodyLimits = BodyLimits()
) -> TreeGenotype:
    return mutate_tree_logged(g, rng, rates, limits)[0]


def crossover_tree(
    a: TreeGenotype, b: TreeGenotype, rng: np.random.Generator, limits: BodyLimits = BodyLimits()
) -> TreeGenotype:
    """Graft a random subtree of ``b`` over a random subtree of ``a``."""
    child = copy.deepcopy(a)
    donors = _nodes(b)[1:]
    if not donors:
        return child
    _, donor, _ = donors[rng.integers(len(donors))]
    recipients = [(parent, path[-1]) for path, _, parent in _nodes(child)[1:]]
    if not recipients:
        recipients = [(child.root, s) for s in range(slot_count(ModuleKind.CORE))]
    for _ in range(MAX_RESAMPLES):
        parent, slot = recipients[rng.integers(len(recipients))]
        if _compatible(parent, donor, limits):
            parent.children[slot] = copy.deepcopy(donor)
            break
    return truncate(child, limits.max_modules)


def decode_tree(g: TreeGenotype) -> tuple[BodyGraph, SineOscillatorBrain]:
    def build(gene: Gene) -> Module:
        return Module(gene.kind, gene.rotation, {s: build(c) for s, c in gene.children.items()})

    body = BodyGraph(build(g.root))
    joints, params = [], []
    for path, node, _ in g.walk():
        if node.kind is ModuleKind.JOINT:
            joints.append(path)
            params.append(node.params)
    return body, SineOscillatorBrain(joints, np.array(params, dtype=float).reshape(-1, 3))


def format_genotype(g: TreeGenotype) -> str:
    def fmt(gene: Gene) -> str:
        return format_node(gene.kind, gene.rotation, gene.params or (), gene.children, fmt)

    return fmt(g.root)


def parse_genotype(text: str) -> TreeGenotype:
    def build(tree) -> Gene:
        kind, rotation, params, children = tree
        if kind is ModuleKind.JOINT and len(params) != 3:
            raise ValueError("joint genes need three oscillator parameters")
        return Gene(
            kind,
            rotation,
            {s: build(c) for s, c in children.items()},
            params=tuple(params) if kind is ModuleKind.JOINT else None,
        )

    return TreeGenotype(build(parse_tree(text)))


class TreeEncoding:
    name = "tree"

    def __init__(self, limits: BodyLimits = BodyLimits(), rates: TreeRates = TreeRates(), init_max_modules: int = 15):
        self.limits = limits
        self.rates = rates
        self.init_max_modules = init_max_modules

    def random(self, rng: np.random.Generator) -> TreeGenotype:
        return random_tree(rng, self.limits, self.init_max_modules)

    def crossover(self, a, b, rng, a_is_fitter: bool = True) -> TreeGenotype:
        return crossover_tree(a, b, rng, self.limits)

    def mutate(self, g, rng) -> TreeGenotype:
        return mutate_tree(g, rng, self.rates, self.limits)

    def develop(self, g: TreeGenotype):
        return decode_tree(g)

    def format(self, g: TreeGenotype) -> str:
        return format_genotype(g)
