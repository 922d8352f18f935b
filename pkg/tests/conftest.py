import math
import re

import mpmath
import numpy as np
import pytest


def mittag_leffler(alpha: float, z: float, digits: int = 40) -> float:
    """E_alpha(z) by its power series in extended precision (moderate |z| only)."""
    with mpmath.workdps(digits):
        z = mpmath.mpf(z)
        total = mpmath.mpf(0)
        for k in range(2000):
            term = z**k / mpmath.gamma(alpha * k + 1)
            total += term
            if k > 10 and abs(term) < mpmath.mpf(10) ** (-digits + 5):
                break
        return float(total)


def bisect(f, lo: float, hi: float, tol: float = 1e-15) -> float:
    """Plain bisection for a sign change of ``f`` on ``[lo, hi]``."""
    flo = f(lo)
    assert flo * f(hi) < 0, "no sign change"
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def observed_orders(errors) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = ["mittag_leffler", "bisect", "observed_orders", "math"]


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record and print one ``criterion k: PASS|FAIL`` line, then assert it."""
    lines = request.config.stash[_VERDICTS]

    def record(number, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        def key(line):
            label = line.split()[1].rstrip(":")
            return int(re.match(r"\d+", label).group()), label

        for line in sorted(lines, key=key):
            terminalreporter.write_line(line)
