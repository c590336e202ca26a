"""Shared, session-cached solves so expensive objects are computed once."""

import time
from functools import lru_cache

import pytest

from annuflow import PhysicalConfig, find_threshold, solve_basic_state

COUPLED_CFG = PhysicalConfig(dT=6.4, dT_h=6.4, biot=1.25)
DEEP_CFG = PhysicalConfig(d=0.008, dT=1.84, dT_h=0.3, biot=0.8)
STRONG_CFG = PhysicalConfig(dT=20.41, dT_h=10.0, biot=0.3)
WAVE_CFG = PhysicalConfig(dT=8.63, dT_h=5.0, biot=0.5)


@lru_cache(maxsize=None)
def basic(cfg: PhysicalConfig, N: int = 25, M: int = 13):
    return solve_basic_state(cfg, N, M)


@lru_cache(maxsize=None)
def _timed_threshold(cfg, search, N, M, coupled, m_range, tol):
    t0 = time.perf_counter()
    result = find_threshold(cfg, search, tol=tol, N=N, M=M, coupled=coupled, m_range=m_range)
    return result, time.perf_counter() - t0


def threshold(cfg: PhysicalConfig, search=(1.0, 20.0), N: int = 25, M: int = 13, coupled: bool = False,
              m_range=None, tol: float = 0.02):
    return _timed_threshold(cfg, tuple(search), N, M, coupled, m_range, tol)[0]


def threshold_seconds(cfg: PhysicalConfig, search=(1.0, 20.0), N: int = 25, M: int = 13, coupled: bool = False,
                      m_range=None, tol: float = 0.02) -> float:
    """Wall time of the first (uncached) computation of the same threshold."""
    return _timed_threshold(cfg, tuple(search), N, M, coupled, m_range, tol)[1]


@pytest.fixture(scope="session")
def coupled_state():
    return basic(COUPLED_CFG)


@pytest.fixture(scope="session")
def deep_state():
    return basic(DEEP_CFG)


@pytest.fixture(scope="session")
def strong_state():
    return basic(STRONG_CFG)


# Acceptance bookkeeping: each check records (criterion, title, part, passed, detail).
ACCEPTANCE = []


def record(criterion: int, title: str, part: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.append((criterion, title, part, bool(passed), detail))
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    by_id = {}
    for crit, title, part, ok, detail in ACCEPTANCE:
        by_id.setdefault(crit, (title, []))[1].append((part, ok, detail))
    for crit in sorted(by_id):
        title, parts = by_id[crit]
        ok = all(p[1] for p in parts)
        details = "; ".join(f"{p[0]}: {'ok' if p[1] else 'FAIL'} ({p[2]})" for p in parts)
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {crit} {title} -- {details}")
