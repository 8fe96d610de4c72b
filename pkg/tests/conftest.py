import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from perfix.vocab import load_default_vocabulary  # noqa: E402


@pytest.fixture(scope="session")
def vocab():
    return load_default_vocabulary()


def golden_path(name: str) -> str:
    return os.path.join(os.path.dirname(__file__), "goldens", name)


def read_golden(name: str) -> str:
    with open(golden_path(name), encoding="utf-8", newline="") as fh:
        return fh.read()
