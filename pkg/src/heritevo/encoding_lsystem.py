"""Indirect encoding: an L-system grammar grows the body, a CPPN weights its CPG."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from heritevo.controller import CpgNetwork, build_cpg_topology
from heritevo.cppn import (
    CppnGenome,
    CppnRates,
    InnovationTracker,
    crossover_cppn,
    format_cppn,
    mutate_cppn,
    parse_cppn,
    query_weights,
    random_cppn,
    substrate_coords,
)
from heritevo.morphology import BodyGraph, BodyLimits, Module, ModuleKind, embed, slot_index


class Symbol(str, enum.Enum):
    CORE = "CoreSym"
    BRICK = "BrickSym"
    VERTICAL_JOINT = "VerticalJointSym"
    HORIZONTAL_JOINT = "HorizontalJointSym"
    ADD_LEFT = "add_left"
    ADD_FRONT = "add_front"
    ADD_RIGHT = "add_right"
    MOVE_BACK = "move_back"
    MOVE_RIGHT = "move_right"
    MOVE_FRONT = "move_front"
    MOVE_LEFT = "move_left"


MODULE_SYMBOLS = (Symbol.CORE, Symbol.BRICK, Symbol.VERTICAL_JOINT, Symbol.HORIZONTAL_JOINT)
MOUNT_SYMBOLS = (Symbol.ADD_LEFT, Symbol.ADD_FRONT, Symbol.ADD_RIGHT)
MOVE_SYMBOLS = (Symbol.MOVE_BACK, Symbol.MOVE_RIGHT, Symbol.MOVE_FRONT, Symbol.MOVE_LEFT)
# symbols a random rule body may contain after its leading module symbol
BODY_SYMBOLS = tuple(s for s in Symbol if s is not Symbol.CORE)

_DIRECTION = {
    Symbol.ADD_LEFT: "left", Symbol.ADD_FRONT: "front", Symbol.ADD_RIGHT: "right",
    Symbol.MOVE_LEFT: "left", Symbol.MOVE_FRONT: "front", Symbol.MOVE_RIGHT: "right",
}
_MODULE = {
    Symbol.BRICK: (ModuleKind.BRICK, 0),
    Symbol.VERTICAL_JOINT: (ModuleKind.JOINT, 90),
    Symbol.HORIZONTAL_JOINT: (ModuleKind.JOINT, 0),
}

Sentence = tuple[Symbol, ...]
AXIOM: Sentence = (Symbol.CORE,)
MAX_SENTENCE = 300


@dataclass
class Grammar:
    rules: dict[Symbol, tuple[Symbol, ...]]

    def __post_init__(self):
        missing = [s for s in MODULE_SYMBOLS if s not in self.rules]
        if missing or set(self.rules) - set(MODULE_SYMBOLS):
            raise ValueError("grammar needs exactly one rule per module symbol")
        self.rules = {s: tuple(Symbol(x) for x in self.rules[s]) for s in MODULE_SYMBOLS}
        if not self.rules[Symbol.CORE] or self.rules[Symbol.CORE][0] is not Symbol.CORE:
            raise ValueError("the CoreSym rule must start with CoreSym")

    @property
    def axiom(self) -> Sentence:
        return AXIOM


def expand(g: Grammar, iterations: int, max_length: int = MAX_SENTENCE) -> Sentence:
    """Parallel rewriting of the axiom; each round replaces every module symbol at once."""
    sentence: list[Symbol] = list(AXIOM)
    for _ in range(iterations):
        out: list[Symbol] = []
        for s in sentence:
            out.extend(g.rules.get(s, (s,)))
            if len(out) >= max_length:
                break
        sentence = out[:max_length]
    return tuple(sentence)


def decode_sentence(s, limits: BodyLimits = BodyLimits()) -> BodyGraph:
    """Build a body by reading ``s`` left to right with a cursor that starts on the core."""
    root = Module(ModuleKind.CORE)
    parents: dict[int, Module] = {}
    cursor = root
    count = 1
    i = 0
    while i < len(s):
        sym = s[i]
        if sym in MOUNT_SYMBOLS:
            if i + 1 >= len(s) or s[i + 1] not in MODULE_SYMBOLS:
                i += 1
                continue
            target = s[i + 1]
            i += 2  # the module symbol is consumed even if mounting fails
            if target is Symbol.CORE or count >= limits.max_modules:
                continue
            slot = slot_index(cursor.kind, _DIRECTION[sym])
            if slot is None or slot in cursor.children:
                continue
            kind, rotation = _MODULE[target]
            if limits.no_joint_on_joint and kind is ModuleKind.JOINT and cursor.kind is ModuleKind.JOINT:
                continue
            child = Module(kind, rotation)
            cursor.children[slot] = child
            parents[id(child)] = cursor
            count += 1
            continue
        if sym is Symbol.MOVE_BACK:
            cursor = parents.get(id(cursor), cursor)
        elif sym in MOVE_SYMBOLS:
            slot = slot_index(cursor.kind, _DIRECTION[sym])
            if slot is not None and slot in cursor.children:
                cursor = cursor.children[slot]
        i += 1
    return BodyGraph(root)


def _random_rule(rng: np.random.Generator, head: Symbol, length: int, mount_prob: float) -> tuple[Symbol, ...]:
    rule = [head]
    while len(rule) < length:
        if rng.random() < mount_prob:
            rule.append(MOUNT_SYMBOLS[rng.integers(len(MOUNT_SYMBOLS))])
            rule.append(MODULE_SYMBOLS[1 + rng.integers(len(MODULE_SYMBOLS) - 1)])
        else:
            rule.append(MOVE_SYMBOLS[rng.integers(len(MOVE_SYMBOLS))])
    return tuple(rule[:length])


def random_grammar(rng: np.random.Generator, max_rule_length: int = 8, mount_prob: float = 0.6) -> Grammar:
    """Every rule starts with its own symbol, so expansion never loses a module."""
    rules = {}
    for head in MODULE_SYMBOLS:
        length = int(rng.integers(1, max_rule_length + 1))
        rules[head] = _random_rule(rng, head, length, mount_prob)
    return Grammar(rules)


@dataclass(frozen=True)
class GrammarRates:
    probability: float = 0.59
    max_rule_length: int = 20


GRAMMAR_OPERATORS = ("insert", "delete", "replace")


def mutate_grammar_logged(
    g: Grammar, rng: np.random.Generator, rates: GrammarRates = GrammarRates()
) -> tuple[Grammar, str | None]:
    rules = dict(g.rules)
    if rng.random() >= rates.probability:
        return Grammar(rules), None
    op = GRAMMAR_OPERATORS[rng.integers(len(GRAMMAR_OPERATORS))]
    head = MODULE_SYMBOLS[rng.integers(len(MODULE_SYMBOLS))]
    rule = list(rules[head])
    # index 0 (the rule's own symbol) is never touched
    if op == "insert":
        if len(rule) < rates.max_rule_length:
            pos = 1 + int(rng.integers(len(rule)))
            rule.insert(pos, BODY_SYMBOLS[rng.integers(len(BODY_SYMBOLS))])
    elif len(rule) > 1:
        pos = 1 + int(rng.integers(len(rule) - 1))
        if op == "delete":
            del rule[pos]
        else:
            rule[pos] = BODY_SYMBOLS[rng.integers(len(BODY_SYMBOLS))]
    rules[head] = tuple(rule)
    return Grammar(rules), op


def mutate_grammar(g: Grammar, rng: np.random.Generator, rates: GrammarRates = GrammarRates()) -> Grammar:
    return mutate_grammar_logged(g, rng, rates)[0]


def crossover_grammar(a: Grammar, b: Grammar, rng: np.random.Generator) -> Grammar:
    return Grammar({s: (a.rules[s] if rng.random() < 0.5 else b.rules[s]) for s in MODULE_SYMBOLS})


def format_grammar(g: Grammar) -> str:
    return "".join(f"{s.value} -> {' '.join(x.value for x in g.rules[s])}\n" for s in MODULE_SYMBOLS)


def parse_grammar(text: str) -> Grammar:
    rules = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        head, _, body = line.partition("->")
        rules[Symbol(head.strip())] = tuple(Symbol(t) for t in body.split())
    return Grammar(rules)


@dataclass
class LSystemGenotype:
    grammar: Grammar
    cppn: CppnGenome = field(default_factory=CppnGenome.bare)


def decode_lsystem(
    g: Grammar, cppn: CppnGenome, limits: BodyLimits = BodyLimits(), iterations: int = 3
) -> tuple[BodyGraph, CpgNetwork]:
    body = decode_sentence(expand(g, iterations), limits)
    e = embed(body)
    net = build_cpg_topology(e)
    query_weights(cppn, net, substrate_coords(net, e))
    return body, net


def format_lsystem_genotype(g: LSystemGenotype) -> str:
    return "[grammar]\n" + format_grammar(g.grammar) + "[cppn]\n" + format_cppn(g.cppn)


def parse_lsystem_genotype(text: str) -> LSystemGenotype:
    head, _, rest = text.partition("[cppn]\n")
    return LSystemGenotype(parse_grammar(head.replace("[grammar]\n", "", 1)), parse_cppn(rest))


class LSystemEncoding:
    name = "lsystem"

    def __init__(
        self,
        limits: BodyLimits = BodyLimits(),
        grammar_rates: GrammarRates = GrammarRates(),
        cppn_rates: CppnRates = CppnRates(),
        iterations: int = 3,
        max_rule_length: int = 8,
    ):
        self.limits = limits
        self.grammar_rates = grammar_rates
        self.cppn_rates = cppn_rates
        self.iterations = iterations
        self.max_rule_length = max_rule_length
        self.tracker = InnovationTracker()

    def random(self, rng: np.random.Generator) -> LSystemGenotype:
        return LSystemGenotype(random_grammar(rng, self.max_rule_length), random_cppn(rng, self.tracker))

    def crossover(self, a, b, rng, a_is_fitter: bool = True) -> LSystemGenotype:
        return LSystemGenotype(
            crossover_grammar(a.grammar, b.grammar, rng),
            crossover_cppn(a.cppn, b.cppn, a_is_fitter, rng),
        )

    def mutate(self, g, rng) -> LSystemGenotype:
        return LSystemGenotype(
            mutate_grammar(g.grammar, rng, self.grammar_rates),
            mutate_cppn(g.cppn, rng, self.tracker, self.cppn_rates),
        )

    def develop(self, g: LSystemGenotype):
        return decode_lsystem(g.grammar, g.cppn, self.limits, self.iterations)

    def format(self, g: LSystemGenotype) -> str:
        return format_lsystem_genotype(g)
