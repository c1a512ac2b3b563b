from __future__ import annotations

import pytest

from inftdd.config import SimConfig


def small_config(**sections) -> SimConfig:
    """Four cells, short horizon: big enough for CLI, fast enough for unit tests."""
    base = dict(
        network={"num_cells": 4, "grid_rows": 2, "grid_cols": 2, "hall_length_m": 40.0, "hall_width_m": 40.0},
        traffic={"k_dl": 3, "k_ul": 3, "k_embb_dl": 1},
        run={"duration_s": 0.06, "warmup_frames": 1},
    )
    for name, patch in sections.items():
        base.setdefault(name, {}).update(patch)
    return SimConfig().replace(**base)


def single_cell_config(**sections) -> SimConfig:
    base = dict(
        network={"num_cells": 1, "grid_rows": 1, "grid_cols": 1},
        traffic={"k_dl": 1, "k_ul": 1},
        run={"duration_s": 0.02, "warmup_frames": 0},
    )
    for name, patch in sections.items():
        base.setdefault(name, {}).update(patch)
    return SimConfig().replace(**base)


@pytest.fixture
def small_cfg() -> SimConfig:
    return small_config()


# one line per acceptance criterion, echoed in the terminal summary so it survives output capture
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(criterion: int, passed: bool, detail: str) -> str:
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
