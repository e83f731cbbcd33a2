import numpy as np
import pytest

from timedil import kernels


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    """Kernel table for one backend; tests run against both."""
    return kernels.BACKENDS[request.param]


def rand32(rng, *shape):
    return rng.uniform(-1, 1, size=shape).astype(np.float32)


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS, key=lambda k: (int(str(k).split()[0]), str(k))):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
