import os
import sys
from functools import lru_cache

sys.path.insert(0, os.path.dirname(__file__))

from llecomb import continuation as cont  # noqa: E402
from llecomb.model import Parameters, enumerate_bifpoints  # noqa: E402


def find_candidate(mode, p, k, sigma, param=None):
    """The unique candidate with ``(k, sigma)``, nearest to ``param`` if given."""
    rows = [c for c in enumerate_bifpoints(mode, p) if c.k == k and c.sigma == sigma]
    if param is not None:
        rows.sort(key=lambda c: abs(c.param - param))
    return rows[0]


@lru_cache(maxsize=None)
def cached_branch(mode, d, fixed, k, sigma, param=None, max_steps=1500):
    """Continue the branch from one candidate; shared by every test module of a session."""
    p = Parameters(d=d, f=fixed) if mode == "hat" else Parameters(d=d, zeta=fixed)
    c = find_candidate(mode, p, k, sigma, param)
    cfg = cont.ContinuationConfig(max_steps=max_steps)
    return cont.continue_branch(cont.branch_switch(c, p), p, cfg, origin=c)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    """Store the one-line verdict of an acceptance criterion for the terminal summary."""
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
