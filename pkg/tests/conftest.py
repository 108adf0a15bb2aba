import numpy as np
import pytest

from heritevo.morphology import parse_body

# lines recorded by test_acceptance.py, echoed at the end of the session so
# they show up in the terminal report even when output capture is on
ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:2d}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# a plus-shaped "spider": every core slot carries joint-brick-joint-brick
SPIDER = "Core(0)[" + ", ".join(
    f"{s}: Joint(90)[0: Brick(0)[1: Joint(90)[0: Brick(0)]]]" for s in range(4)
) + "]"


@pytest.fixture
def spider():
    return parse_body(SPIDER)
