import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20231012)


CRITERIA = {
    "c01": "critical dimension (128, 1e4, 4096) = 92",
    "c02": "pivots(4096) round to (2608, 1304, 652)",
    "c03": "critical base(4096, 16384) in [71500, 72000]",
    "c04": "bound(128, 1e6, 92) > 100000 and in [128000, 130000]",
    "c05": "real vs complex score, 1000 cases, 1e-9",
    "c06": "shift invariance, 1000 cases, 1e-6",
    "c07": "critical dimension vs period counting grid",
    "c08": "base = T/2pi covers every period, 200 cases",
    "c09": "dynamic NTK alpha schedule, 100 references",
    "c10": "bound at critical base within [T_tune, T_tune*beta^(2/d)]",
    "c11": "unit-parameter variants collapse to vanilla, 500 cases",
    "c12": "all-ones OOD peak beyond 4096 exceeds peak within 4096",
    "c13": "CLI predict golden files; trace byte-identical across runs/threads",
}


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if rep.when != "call" and status != "error":
                continue
            name = rep.nodeid.split("::")[-1]
            if "test_acceptance.py" not in rep.nodeid or not name.startswith("test_c"):
                continue
            key = name[5:8]
            ok = status == "passed"
            outcomes[key] = outcomes.get(key, True) and ok
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for key, text in CRITERIA.items():
        if key in outcomes:
            mark = "PASS" if outcomes[key] else "FAIL"
            terminalreporter.write_line(f"{mark}  {key}  {text}")
