import numpy as np
import pytest

_RESULTS = {}
_TITLES = {}


class AcceptanceRecorder:
    """Collects one verdict per acceptance criterion; printed at the end of the run."""

    def __init__(self, number, title):
        self.number = number
        _TITLES[number] = title
        self.checks = []

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))
        _RESULTS[self.number] = all(c[0] for c in self.checks)
        return bool(ok)

    def failures(self):
        return [d for ok, d in self.checks if not ok]


@pytest.fixture
def criterion(request):
    def make(number, title):
        return AcceptanceRecorder(number, title)
    return make


def pytest_terminal_summary(terminalreporter):
    if not _TITLES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_TITLES):
        verdict = "PASS" if _RESULTS.get(number, False) else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {_TITLES[number]}")


def random_spd(rng, n, cond=50.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.geomspace(1.0, cond, n) * rng.uniform(0.5, 2.0)
    rng.shuffle(lam)
    s = (q * lam) @ q.T
    return 0.5 * (s + s.T)


def corr2(sigma, rho):
    return sigma ** 2 * np.array([[1.0, rho], [rho, 1.0]])
