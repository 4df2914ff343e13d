from fractions import Fraction
from math import comb

import pytest


def exact_tail(n: int, k: int, a: Fraction) -> Fraction:
    """P[X >= k] for X ~ Binomial(n, a), summed exactly."""
    return sum(comb(n, i) * a**i * (1 - a) ** (n - i) for i in range(k, n + 1))


def brute_eta(k: int, a: float, p: float, limit: int = 2000) -> int:
    """Linear scan for the smallest n meeting p, in exact arithmetic."""
    fa, fp = Fraction(a), Fraction(p)
    for n in range(k, limit):
        if exact_tail(n, k, fa) >= fp:
            return n
    raise AssertionError("no n found")


@pytest.fixture
def tiny_sim_doc():
    """A small, fast simulator configuration."""
    return {
        "seed": 7,
        "initial_nodes": 60,
        "availability": 0.75,
        "code": {"kind": "msr", "k": 4, "d": 6},
        "object_size": 256 * 1024 * 1024,
        "object_count": 400,
        "duration_days": 6,
        "warmup_days": 1,
        "metrics_interval_hours": 12,
    }


# Acceptance results, keyed by criterion number: list of (part, ok, detail).
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, part: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[criterion]
        ok = all(p[1] for p in parts)
        failed = [f"{name}: {detail}" for name, good, detail in parts if not good]
        shown = "; ".join(failed) if failed else "; ".join(f"{n}: {d}" for n, _, d in parts if d)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {criterion:>2}  {shown}")
