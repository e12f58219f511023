"""Rewrite tests/golden/* from tests/golden_cases.py."""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from golden_cases import GOLDEN  # noqa: E402

for name, build in GOLDEN.items():
    path = ROOT / "tests" / "golden" / name
    path.write_bytes(build())
    print(f"wrote {path.relative_to(ROOT)} ({path.stat().st_size} bytes)")
