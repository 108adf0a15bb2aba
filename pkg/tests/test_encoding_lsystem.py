import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heritevo.cppn import BIAS, OUTPUT, ConnGene, CppnGenome
from heritevo.encoding_lsystem import (
    MODULE_SYMBOLS,
    Grammar,
    GrammarRates,
    LSystemEncoding,
    Symbol,
    crossover_grammar,
    decode_lsystem,
    decode_sentence,
    expand,
    format_grammar,
    format_lsystem_genotype,
    mutate_grammar,
    mutate_grammar_logged,
    parse_grammar,
    parse_lsystem_genotype,
    random_grammar,
)
from heritevo.morphology import BodyLimits, ModuleKind, count_modules, format_body, slot_count, validate

C, B, V, H = Symbol.CORE, Symbol.BRICK, Symbol.VERTICAL_JOINT, Symbol.HORIZONTAL_JOINT
AF, AL, AR = Symbol.ADD_FRONT, Symbol.ADD_LEFT, Symbol.ADD_RIGHT
MB, MF, ML, MR = Symbol.MOVE_BACK, Symbol.MOVE_FRONT, Symbol.MOVE_LEFT, Symbol.MOVE_RIGHT

WORKED = Grammar({C: (C, AF, B), B: (B,), V: (V,), H: (H,)})


def sequential_expand(g: Grammar, iterations: int) -> tuple:
    """Oracle: rewrite by scanning with an explicit write pointer, never touching fresh output."""
    s = list(g.axiom)
    for _ in range(iterations):
        i = 0
        while i < len(s):
            rule = g.rules.get(s[i])
            if rule is None:
                i += 1
                continue
            s[i:i + 1] = rule
            i += len(rule)
    return tuple(s)


def test_worked_example():
    assert expand(WORKED, 0) == (C,)
    assert expand(WORKED, 1) == (C, AF, B)
    assert expand(WORKED, 2) == (C, AF, B, AF, B)


@settings(max_examples=100)
@given(st.integers(0, 10**6), st.integers(0, 3))
def test_parallel_equals_sequential(seed, iterations):
    g = random_grammar(np.random.default_rng(seed), 5)
    expected = sequential_expand(g, iterations)[:300]
    assert expand(g, iterations) == expected


def test_length_cap():
    g = Grammar({C: (C, AF, B, AL, B, AR, B), B: (B,) + (AF, B) * 9, V: (V,), H: (H,)})
    assert len(expand(g, 5)) == 300


def test_decode_examples():
    assert count_modules(decode_sentence((C,))) == 1
    assert format_body(decode_sentence((C, AF, B))) == "Core(0)[0: Brick(0)]"
    assert count_modules(decode_sentence((C, AF, MB))) == 1


def test_joint_symbols_differ_only_in_rotation():
    v = decode_sentence((C, AF, V)).root.children[0]
    h = decode_sentence((C, AF, H)).root.children[0]
    assert v.kind is h.kind is ModuleKind.JOINT
    assert (v.rotation, h.rotation) == (90, 0)


def test_cursor_moves():
    # core -> front brick -> its left child -> back to brick -> right child
    body = decode_sentence((C, AF, B, MF, AL, B, ML, MB, AR, H))
    assert format_body(body) == "Core(0)[0: Brick(0)[0: Brick(0), 2: Joint(0)]]"


def test_occupied_slot_skips_and_consumes():
    body = decode_sentence((C, AF, B, AF, V, AL, H))
    assert format_body(body) == "Core(0)[0: Brick(0), 3: Joint(0)]"


def test_joint_on_joint_skipped():
    body = decode_sentence((C, AF, H, MF, AF, V, AF, B))
    assert format_body(body) == "Core(0)[0: Joint(0)[0: Brick(0)]]"


def test_cap_respected():
    s = (C,) + (AF, B, MF) * 40
    assert count_modules(decode_sentence(s, BodyLimits(10))) == 10


def test_joint_has_only_front_slot():
    body = decode_sentence((C, AF, H, MF, AL, B, AR, B))
    assert format_body(body) == "Core(0)[0: Joint(0)]"


def test_random_grammar_deterministic():
    assert random_grammar(np.random.default_rng(5)) == random_grammar(np.random.default_rng(5))


def test_rule_length_one():
    g = random_grammar(np.random.default_rng(0), max_rule_length=1)
    assert all(len(r) == 1 for r in g.rules.values())
    assert g.rules[C] == (C,)


def test_random_grammars_decode_validly():
    rng = np.random.default_rng(17)
    limits = BodyLimits(30)
    for _ in range(1000):
        body = decode_sentence(expand(random_grammar(rng), 3), limits)
        assert validate(body, limits).ok
        for _, node, parent in body.walk():
            assert len(node.children) <= slot_count(node.kind)
            if parent is not None:
                assert not (node.kind is parent.kind is ModuleKind.JOINT)


@settings(max_examples=200)
@given(st.lists(st.sampled_from(list(Symbol)), max_size=80))
def test_arbitrary_sentences_valid(sentence):
    assert validate(decode_sentence(tuple(sentence))).ok


def test_zero_rate_identity(rng):
    g = random_grammar(rng)
    assert mutate_grammar(g, rng, GrammarRates(probability=0.0)) == g


def test_leading_symbol_protected():
    g = Grammar({C: (C,), B: (B,), V: (V,), H: (H,)})
    rng = np.random.default_rng(0)
    for _ in range(200):
        m, op = mutate_grammar_logged(g, rng, GrammarRates(probability=1.0))
        if op != "insert":
            assert m == g
    for _ in range(2000):
        g = mutate_grammar(g, rng, GrammarRates(probability=1.0))
        assert all(g.rules[s][0] is s for s in MODULE_SYMBOLS)
        assert all(len(r) <= 20 for r in g.rules.values())


def test_mutation_frequency():
    rng = np.random.default_rng(21)
    g = random_grammar(rng)
    hits = sum(mutate_grammar_logged(g, rng)[1] is not None for _ in range(10000))
    assert abs(hits / 10000 - 0.59) <= 0.02


def test_crossover_identical(rng):
    g = random_grammar(rng)
    assert crossover_grammar(g, g, rng) == g


def test_crossover_rule_sources():
    rng = np.random.default_rng(2)
    a, b = random_grammar(rng), random_grammar(rng)
    while any(a.rules[s] == b.rules[s] for s in MODULE_SYMBOLS):
        b = random_grammar(rng)
    from_a = {s: 0 for s in MODULE_SYMBOLS}
    for _ in range(1000):
        child = crossover_grammar(a, b, rng)
        for s in MODULE_SYMBOLS:
            assert child.rules[s] in (a.rules[s], b.rules[s])
            from_a[s] += child.rules[s] == a.rules[s]
    assert all(abs(n / 1000 - 0.5) <= 0.05 for n in from_a.values())


def test_grammar_text():
    text = format_grammar(WORKED)
    assert text.splitlines()[0] == "CoreSym -> CoreSym add_front BrickSym"
    assert parse_grammar(text) == WORKED


def test_invalid_grammars_rejected():
    with pytest.raises(ValueError):
        Grammar({C: (B,), B: (B,), V: (V,), H: (H,)})
    with pytest.raises(ValueError):
        Grammar({C: (C,)})


def constant_cppn(k):
    g = CppnGenome.bare()
    g.conns[0] = ConnGene(0, BIAS, OUTPUT, k)
    return g


def test_decode_without_joints():
    body, net = decode_lsystem(WORKED, constant_cppn(0.3))
    # the cursor never leaves the core, so repeated add_front hits an occupied slot
    assert net.n_joints == 0 and count_modules(body) == 2


def test_decode_lsystem_weights():
    g = Grammar({C: (C, AF, V, AL, H), B: (B,), V: (V, AF, B), H: (H, AF, B)})
    body, net = decode_lsystem(g, constant_cppn(0.3))
    assert net.n_joints == 2
    assert np.all(net.weights == 0.3) and np.all(net.couplings == 0.3)
    again = decode_lsystem(g, constant_cppn(0.3))
    assert format_body(again[0]) == format_body(body)
    assert np.array_equal(again[1].weights, net.weights)


def test_encoding_round_trip_and_validity():
    enc = LSystemEncoding()
    rng = np.random.default_rng(4)
    pop = [enc.random(rng) for _ in range(20)]
    for _ in range(30):
        i, j = rng.choice(20, 2, replace=False)
        child = enc.mutate(enc.crossover(pop[i], pop[j], rng, True), rng)
        assert validate(enc.develop(child)[0]).ok
        assert parse_lsystem_genotype(format_lsystem_genotype(child)) == child
        pop[i] = child
