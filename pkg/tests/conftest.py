import numpy as np
import pytest

from capexlab.lp import EQ, GE, LE, LPInstance
from capexlab.model import DispatchableTech, Region, ScenarioModel, StorageTech, TransmissionLine


def random_lp(rng: np.random.Generator, max_size: int = 12) -> LPInstance:
    """Small dense LP with mixed senses and bounds.

    Integer data keeps most instances well conditioned while still producing
    degenerate vertices, infeasible systems and unbounded rays.
    """
    n = int(rng.integers(1, max_size + 1))
    m = int(rng.integers(1, max_size + 1))
    # the oracle enumerates every basis; cap the combined size to keep it quick
    while n + m > 14:
        n, m = max(1, n - 1), max(1, m - 1)
    A = rng.integers(-4, 5, size=(m, n)).astype(float)
    A[rng.random((m, n)) < 0.3] = 0.0
    senses = list(rng.choice([LE, GE, EQ], size=m, p=[0.5, 0.3, 0.2]))
    c = rng.integers(-5, 6, size=n).astype(float)
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for j in range(n):
        u = rng.random()
        if u < 0.15:
            lb[j] = -np.inf
        elif u < 0.25:
            lb[j] = float(rng.integers(-3, 2))
        if rng.random() < 0.5:
            base = 0.0 if not np.isfinite(lb[j]) else lb[j]
            ub[j] = base + float(rng.integers(0, 8))
    if rng.random() < 0.3:
        b = rng.integers(-6, 12, size=m).astype(float)
    else:
        # right-hand sides around a point inside the bounds: feasible by construction
        lo = np.where(np.isfinite(lb), lb, -3.0)
        hi = np.where(np.isfinite(ub), ub, lo + 5.0)
        x0 = np.round(lo + rng.random(n) * (hi - lo))
        ax = A @ x0
        gap = rng.integers(0, 4, size=m).astype(float)
        b = np.array([ax[i] + gap[i] if s == LE else ax[i] - gap[i] if s == GE else ax[i]
                      for i, s in enumerate(senses)])
    return LPInstance.from_dense(c, A, senses, b, lb, ub)


@pytest.fixture
def tiny_region():
    def make(demand, rid="R1", **kw):
        return Region(rid, np.asarray(demand, dtype=float), **kw)
    return make


@pytest.fixture
def thermal():
    return DispatchableTech("coal", invest_cost=1000.0, fixed_om=20.0, var_cost=30.0, lifetime=20)


@pytest.fixture
def toy_two_region():
    """24 h, two regions, one line, both storage classes."""
    T = 24
    t = np.arange(T)
    pv = np.clip(np.sin((t - 6) / 12 * np.pi), 0, 1)
    a = Region("A", 50 + 10 * np.sin(t / 24 * 2 * np.pi), {"pv": 120.0}, {"pv": pv})
    b = Region("B", np.full(T, 30.0), {"wind": 40.0}, {"wind": np.full(T, 0.4)})
    return ScenarioModel(
        "toy",
        T,
        (a, b),
        dispatchables=(
            DispatchableTech("ccgt", 800e3, 20e3, 60, availability=0.95, lifetime=30,
                             interest_rate=0.05, role="base"),
            DispatchableTech("ocgt", 400e3, 10e3, 120, role="peak", load_change_cost=2),
        ),
        storages=(
            StorageTech("battery", 200e3, 50e3, 50e3, 0.95, 0.95, role="short"),
            StorageTech("cavern", 1e3, 400e3, 400e3, 0.7, 0.6, role="long"),
        ),
        lines=(TransmissionLine("AB", "A", "B", 10, expansion_cost=300e3, susceptance=5.0),),
    )


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    config.stash[CRITERIA] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    number, title = mark.args
    entry = item.config.stash[CRITERIA].setdefault(number, {"title": title, "tests": {}})
    status = "xfail" if hasattr(rep, "wasxfail") else rep.outcome
    measured = {k: v for k, v in item.user_properties}
    entry["tests"][item.name] = (status, measured)


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def pytest_terminal_summary(terminalreporter, config):
    criteria = config.stash.get(CRITERIA, {})
    if not criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(criteria):
        entry = criteria[number]
        tests = entry["tests"]
        ok = all(status == "passed" for status, _ in tests.values())
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {entry['title']}")
        for name, (status, measured) in tests.items():
            extra = ", ".join(f"{k}={_fmt(v)}" for k, v in measured.items())
            tr.write_line(f"    {status:<7} {name}" + (f"  [{extra}]" if extra else ""))
