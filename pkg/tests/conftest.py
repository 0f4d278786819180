# Global PyTest settings for tests/ directory
from __future__ import annotations

import os

import pytest


def pytest_collection_modifyitems(config, items):
    # acceptance runs that take minutes are opt-in
    if os.environ.get("KGD_RUN_SLOW", "0") in ("1", "true", "True"):
        return
    skip_slow = pytest.mark.skip(reason="slow acceptance run; set KGD_RUN_SLOW=1 to enable")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
