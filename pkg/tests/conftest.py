import shutil

import pytest

from fisheye_synth.cli import main

ACCEPTANCE_LINES = []


def record_acceptance(label, ok, detail=""):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A three-frame generated tree; copy it before modifying anything."""
    root = tmp_path_factory.mktemp("ds") / "small"
    code = main(["generate", str(root), "--frames", "3", "--size", "128", "--focal", "40", "--seed", "3",
                 "--threads", "1"])
    assert code == 0
    return root


@pytest.fixture
def dataset_copy(small_dataset, tmp_path):
    dst = tmp_path / "copy"
    shutil.copytree(small_dataset, dst)
    return dst


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
