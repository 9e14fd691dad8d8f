import numpy as np
import pytest

from fennm.diffnet import NetConfig, init_network

# criterion number -> list of (part, passed, detail); one summary line per criterion
ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str, part: str = "") -> None:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))
    status = "PASS" if passed else "FAIL"
    print(f"criterion {criterion}{' ' + part if part else ''}: {status} {detail}")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria (slow training runs)")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p[1] for p in parts)
        if len(parts) == 1:
            detail = parts[0][2]
        else:
            detail = "; ".join(f"[{name}: {'PASS' if passed else 'FAIL'}] {text}"
                               for name, passed, text in parts)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_net():
    return init_network(NetConfig(2, 4, "tanh", seed=3))
