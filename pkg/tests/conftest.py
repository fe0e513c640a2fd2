import os

# Allow worker-count determinism tests to use two threads even on 1-CPU
# runners; must be set before numba is first imported.
os.environ.setdefault("NUMBA_NUM_THREADS", "2")

import numpy as np
import pytest

from ictlite import Phantom, box, forward_project, make_circular_geometry, sphere


@pytest.fixture(scope="session")
def small_phantom():
    return Phantom((sphere((0.0, 0.0, 0.0), 12.0, 1.0), box((5.0, -4.0, 2.0), (10.0, 8.0, 6.0), 0.5)))


@pytest.fixture(scope="session")
def small_stack(small_phantom):
    """60-view simulated stack on a 32x48 detector."""
    geom = make_circular_geometry(60, 32, 48, 1.0, 200.0)
    return forward_project(small_phantom, geom)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def verdict(capfd):
    """Emit one PASS/FAIL line per acceptance criterion, bypassing capture."""

    def _verdict(name: str, ok: bool, detail: str) -> None:
        status = "PASS" if ok else "FAIL"
        with capfd.disabled():
            print(f"[{status}] {name}: {detail}", flush=True)
        assert ok, f"{name}: {detail}"

    return _verdict
