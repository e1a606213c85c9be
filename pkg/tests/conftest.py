import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wct.pipeline import Pathway, extract_dataset, read_manifest, synth_dataset  # noqa: E402

SYNTH_SEED = 7


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """The calibrated 50/50 synthetic set, written once per session."""
    out = tmp_path_factory.mktemp("synth7")
    synth_dataset(out, 50, 50, SYNTH_SEED)
    return out


@pytest.fixture(scope="session")
def synth_manifest(synth_dir):
    return read_manifest(synth_dir / "manifest.csv")


@pytest.fixture(scope="session")
def synth_features(synth_manifest):
    return {d: extract_dataset(synth_manifest, Pathway(d)) for d in ("wavelet", "graylevel")}


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
    missing = [n for n in range(1, 12) if n not in results]
    if missing:
        terminalreporter.write_line(f"not run: {', '.join(map(str, missing))}")
