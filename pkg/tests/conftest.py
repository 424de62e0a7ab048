"""Gedeelde fixtures: scripts/ op het pad, --runslow en kleine transfer-tabellen."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "scripts"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="draai ook de trage drempel-, tabel- en simulatietests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: volledige DE-drempels, 1025² transfer-tabel of simulaties op bureauschaal")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="alleen met --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def small_transfer(tmp_path_factory):
    """Grof rooster (128 intervallen), snel genoeg voor gewone tests."""
    from turbo.transfer import load_transfer
    return load_transfer(intervals=128, cache_dir=tmp_path_factory.mktemp("cache"))


@pytest.fixture(scope="session")
def full_transfer():
    from turbo.transfer import load_transfer
    return load_transfer()
