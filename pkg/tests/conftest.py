from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from agentmoo.evaluation import EvaluationRecord, ObjectiveVector, load_table2  # noqa: E402
from agentmoo.search_space import default_space  # noqa: E402


@pytest.fixture
def space():
    return default_space()


@pytest.fixture
def table2(space):
    return load_table2(space)


@pytest.fixture
def table2_records(table2):
    return table2.records()


def make_record(space, correctness, gain, runtime, label=None, **values):
    base = {
        "temperature": 0.5,
        "top_p": 0.5,
        "max_tokens": 1024,
        "step_limit": 20,
        "cost_limit": 5.0,
        "env_timeout": 50,
        "llm_timeout": 50,
        "prompt_template": 1,
    }
    base.update(values)
    return EvaluationRecord(space.configuration(base), ObjectiveVector(correctness, gain, runtime), label=label)


# one PASS/FAIL line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
