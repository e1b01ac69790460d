import math

import numpy as np
import pytest

from peltseg import ARMDLCost, NormalMeanCost, NormalMeanVarCost, NormalVarCost

LOG2PI = math.log(2 * math.pi)

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# Direct two-pass evaluations of the cost formulas, used as oracles for the
# prefix-sum implementations.


def direct_mean(seg):
    seg = np.asarray(seg, dtype=float)
    return float(np.sum((seg - seg.mean()) ** 2))


def direct_var(seg, mu):
    seg = np.asarray(seg, dtype=float)
    L = seg.size
    return L * (LOG2PI + math.log(np.sum((seg - mu) ** 2) / L) + 1)


def direct_meanvar(seg):
    seg = np.asarray(seg, dtype=float)
    L = seg.size
    return L * (LOG2PI + math.log(np.sum((seg - seg.mean()) ** 2) / L) + 1)


def direct_yule_walker(seg, p):
    """Innovation variance by solving the Toeplitz Yule-Walker system."""
    seg = np.asarray(seg, dtype=float)
    L = seg.size
    c = seg - seg.mean()
    r = np.array([np.dot(c[: L - k], c[k:]) / L for k in range(p + 1)])
    toeplitz = np.array([[r[abs(i - j)] for j in range(p)] for i in range(p)])
    phi = np.linalg.solve(toeplitz, r[1 : p + 1])
    return float(r[0] - phi @ r[1 : p + 1])


def direct_ar_mdl(seg, p_max):
    L = len(seg)
    costs = [
        math.log(p) + (p + 2) / 2 * math.log(L) + L / 2 * math.log(2 * math.pi * direct_yule_walker(seg, p))
        for p in range(1, p_max + 1)
    ]
    best = int(np.argmin(costs))
    return costs[best], best + 1


def random_piecewise(rng, n, kind="meanvar"):
    """Gaussian data with a few random mean and/or scale shifts."""
    y = rng.normal(size=n)
    n_changes = int(rng.integers(0, max(1, n // 20) + 1))
    cps = np.sort(rng.choice(np.arange(1, n), size=min(n_changes, n - 1), replace=False))
    bounds = np.concatenate([[0], cps, [n]])
    for a, b in zip(bounds[:-1], bounds[1:]):
        if kind in ("mean", "meanvar", "ar-mdl"):
            y[a:b] += rng.normal(0, 3)
        if kind in ("var", "meanvar", "ar-mdl"):
            y[a:b] *= math.exp(rng.normal(0, 1))
    return y


def model_by_name(name, **kw):
    return {
        "mean": lambda: NormalMeanCost(),
        "var": lambda: NormalVarCost(mu=kw.get("mu")),
        "meanvar": lambda: NormalMeanVarCost(),
        "ar-mdl": lambda: ARMDLCost(kw.get("p_max", 1)),
    }[name]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
