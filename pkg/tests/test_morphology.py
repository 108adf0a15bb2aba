import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heritevo.encoding_tree import decode_tree, random_tree
from heritevo.morphology import (
    BodyGraph,
    BodyLimits,
    Module,
    ModuleKind,
    ParseError,
    count_leaves,
    count_modules,
    embed,
    format_body,
    max_leaves,
    parse_body,
    validate,
)
from heritevo.oracles import oracle_cells, oracle_max_leaves, oracle_size


def random_body(seed: int, cap: int = 30) -> BodyGraph:
    return decode_tree(random_tree(np.random.default_rng(seed), BodyLimits(max_modules=cap), init_max_modules=cap))[0]


def test_core_only_embedding():
    e = embed(BodyGraph())
    assert e.placement == {(): (0, 0, 0)}
    assert e.omitted == ()


def test_front_brick_lands_at_plus_y():
    e = embed(parse_body("Core(0)[0: Brick(0)]"))
    assert e.placement[(0,)] == (0, 1, 0)
    assert len(e) == 2


def test_slot_directions_of_core():
    e = embed(parse_body("Core(0)[0: Brick(0), 1: Brick(0), 2: Brick(0), 3: Brick(0)]"))
    assert [e.placement[(s,)] for s in range(4)] == [(0, 1, 0), (1, 0, 0), (0, -1, 0), (-1, 0, 0)]


def test_curl_back_onto_core_is_omitted():
    # right, right, right from a front brick walks a square back to the origin
    body = parse_body("Core(0)[0: Brick(0)[2: Brick(0)[2: Brick(0)[2: Brick(0)]]]]")
    e = embed(body)
    assert e.omitted == ((0, 2, 2, 2),)
    assert len(e) + len(e.omitted) == count_modules(body) == 5


def test_omission_takes_subtree_along():
    body = parse_body("Core(0)[0: Brick(0)[2: Brick(0)[2: Brick(0)[2: Brick(0)[1: Brick(0)]]]]]")
    e = embed(body)
    assert len(e.omitted) == 2


def test_vertical_rotation_turns_brick_sides_upward():
    # after a 90 degree attachment the brick's left/right slots point down/up
    e = embed(parse_body("Core(0)[0: Brick(90)[0: Brick(0), 2: Brick(0)]]"))
    assert {e.placement[(0, 0)], e.placement[(0, 2)]} == {(0, 1, 1), (0, 1, -1)}


@pytest.mark.parametrize("seed", range(40))
def test_embedding_matches_vector_oracle(seed):
    body = random_body(seed)
    e = embed(body)
    cells, omitted = oracle_cells(body)
    assert e.placement == cells
    assert len(e.omitted) == omitted


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_embedding_invariants(seed):
    body = random_body(seed)
    e = embed(body)
    assert e == embed(body)
    assert len(e) + len(e.omitted) == count_modules(body)
    assert e.placement[()] == (0, 0, 0)
    assert len(set(e.placement.values())) == len(e)
    for path in e.placement:
        if path:
            assert path[:-1] in e.placement


def test_validate_accepts_core_only():
    assert validate(BodyGraph(), BodyLimits(30)).ok


def test_validate_module_cap():
    body = parse_body("Core(0)[0: Brick(0)]")
    node = body.root.children[0]
    for _ in range(29):
        nxt = Module(ModuleKind.BRICK)
        node.children[1] = nxt
        node = nxt
    assert count_modules(body) == 31
    report = validate(body, BodyLimits(30))
    assert not report.ok
    assert any("module cap exceeded" in v for v in report.violations)
    assert validate(body, BodyLimits(31)).ok


def test_validate_joint_on_joint():
    body = parse_body("Core(0)[0: Joint(0)[0: Joint(90)]]")
    report = validate(body)
    assert any("joint attached to joint" in v for v in report.violations)
    assert validate(body, BodyLimits(no_joint_on_joint=False)).ok


def test_validate_slot_arity_and_rotation():
    body = BodyGraph(Module(ModuleKind.CORE, 0, {5: Module(ModuleKind.JOINT, 45, {1: Module(ModuleKind.BRICK)})}))
    v = validate(body).violations
    assert any("slot 5 out of range" in x for x in v)
    assert any("slot 1 out of range for Joint" in x for x in v)
    assert any("bad rotation 45" in x for x in v)


def test_validate_lists_every_violation():
    body = BodyGraph(Module(ModuleKind.BRICK, 0, {0: Module(ModuleKind.CORE)}))
    assert len(validate(body).violations) == 2


def test_count_modules_examples():
    assert count_modules(BodyGraph()) == 1
    assert count_modules(parse_body("Core(0)[0: Brick(0), 1: Brick(0), 2: Brick(0), 3: Brick(0)]")) == 5


@pytest.mark.parametrize("seed", range(20))
def test_count_modules_matches_recursive_oracle(seed):
    body = random_body(seed)
    assert count_modules(body) == oracle_size(body)


def test_twelve_module_tree_count():
    trees = (random_tree(np.random.default_rng(s), BodyLimits(12), init_max_modules=12) for s in range(500))
    g = next(t for t in trees if len(t) == 12)
    body = decode_tree(g)[0]
    assert count_modules(body) == 12 == oracle_size(body)


def test_max_leaves_matches_enumeration():
    assert [max_leaves(m) for m in range(1, 13)] == [oracle_max_leaves(m) for m in range(1, 13)]
    # frozen from the enumeration
    assert [max_leaves(m) for m in range(1, 13)] == [0, 1, 2, 3, 4, 4, 5, 6, 6, 7, 8, 8]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 12))
def test_leaf_count_bounded_by_max(seed, cap):
    body = random_body(seed, cap)
    assert count_leaves(body) <= max_leaves(count_modules(body))


def test_text_round_trip():
    text = "Core(0)[0: Brick(90)[1: Joint(0)], 2: Brick(0)]"
    body = parse_body(text)
    assert format_body(body) == text
    assert parse_body(format_body(body)) == body


@pytest.mark.parametrize("bad", ["Core(0)[0 Brick(0)]", "Blob(0)", "Core(0)[0: Brick(0)", "Core(0)[0: Brick(0), 0: Brick(0)]"])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_body(bad)
