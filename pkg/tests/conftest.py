"""Общие фикстуры тестов."""

import os
import sys
from pathlib import Path

# Журналы не должны появляться в рабочем каталоге тестов
os.environ["LFSG_LOG_FILE"] = ""
os.environ["LFSG_RUN_DB"] = ""

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import pytest  # noqa: E402

from data import SyntheticSpec, generate_synthetic  # noqa: E402


@pytest.fixture
def two_subspaces():
    """Два 2-мерных подпространства в R^20, по 30 точек, без шума."""
    return generate_synthetic(SyntheticSpec.uniform(2, 20, 2, 30, 0.0, seed=3))


@pytest.fixture
def four_subspaces():
    """Четыре 3-мерных подпространства в R^30, по 40 точек, без шума."""
    return generate_synthetic(SyntheticSpec.uniform(4, 30, 3, 40, 0.0, seed=7))
