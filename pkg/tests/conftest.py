import os
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory) -> Path:
    """Scan cache shared by the session; CFQ_TEST_CACHE points at a persistent one."""
    env = os.environ.get("CFQ_TEST_CACHE")
    if env:
        path = Path(env)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp("cfq-cache")
