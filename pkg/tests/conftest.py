import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from asip.world import GridSpec, ReferenceMap, SensorModel

settings.register_profile(
    "repo", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("repo")


def room_structure(spec: GridSpec, thickness: int = 3) -> np.ndarray:
    s = np.zeros(spec.shape, dtype=bool)
    s[:thickness, :] = s[-thickness:, :] = True
    s[:, :thickness] = s[:, -thickness:] = True
    return s


def make_room(size=8.0, res=0.1, start=None, extra=None) -> ReferenceMap:
    n = int(round(size / res))
    spec = GridSpec(res, n, n)
    s = room_structure(spec)
    if extra is not None:
        s |= extra(spec)
    if start is None:
        start = (1.0, 1.0)
    return ReferenceMap.from_structure(spec, s, start=start)


@pytest.fixture(scope="session")
def room():
    return make_room()


@pytest.fixture(scope="session")
def sensor():
    return SensorModel(fov=1.5, max_range=4.0)


# acceptance criteria register a one-line verdict here; printed after the run
ACCEPTANCE: dict = {}


def report(key: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE[key] = (bool(passed), detail)
    print(f"{key}: {'PASS' if passed else 'FAIL'}  {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")
