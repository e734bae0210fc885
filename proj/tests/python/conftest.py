"""Make the smoke tests runnable against an installed wheel or, failing that,
against the in-tree CMake build (python/ package + build/ extension)."""

import os
import sys
from pathlib import Path

try:
    import drpl  # noqa: F401  (installed wheel)
except ModuleNotFoundError:
    root = Path(__file__).resolve().parents[2]
    build = Path(os.environ.get("DRPL_BUILD_DIR", root / "build"))
    sys.path.insert(0, str(root / "python"))
    sys.path.insert(0, str(build))
