import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `reference` importable

from gyronet._alloc import tune_allocator
from gyronet.graphs import load_dataset

tune_allocator()

FIXTURES = Path(__file__).parent / "fixtures"
DATA_ROOT = Path(os.environ.get("GYRONET_DATA_DIR",
                                Path(__file__).parent.parent / "data"))


@pytest.fixture(scope="session")
def toyclique():
    return load_dataset(FIXTURES / "toyclique")


@pytest.fixture(scope="session")
def toyclique_dir():
    return FIXTURES / "toyclique"


def dataset_dir_or_skip(name: str) -> Path:
    """Real benchmark datasets are produced offline by the converter; skip
    cleanly when they have not been generated in this checkout."""
    path = DATA_ROOT / name
    if not (path / "edges.tsv").is_file():
        pytest.skip(
            f"{name} dataset not present at {path}; run the converter on the "
            f"public distribution files to enable this check "
            f"(see README, 'Real datasets')")
    return path
