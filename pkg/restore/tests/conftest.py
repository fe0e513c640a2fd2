import pytest


@pytest.fixture()
def verdict(capfd):
    """Emit one PASS/FAIL line per acceptance criterion, bypassing capture."""

    def _verdict(name: str, ok: bool, detail: str) -> None:
        status = "PASS" if ok else "FAIL"
        with capfd.disabled():
            print(f"[{status}] {name}: {detail}", flush=True)
        assert ok, f"{name}: {detail}"

    return _verdict
