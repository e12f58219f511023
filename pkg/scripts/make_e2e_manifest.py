"""Regenerate manifests/e2e_pipeline.json.

Runs the phantom -> strain -> epr -> clip -> guo -> metrics chain in a scratch
directory and records the SHA-256 of every data file it produces. Run-manifest
JSON files are not hashed because they carry wall-clock timings.
"""

import hashlib
import json
import sys
import tempfile
from pathlib import Path

from elastorefine.cli import main

STEPS = [
    ["phantom", "--rows", "64", "--cols", "64", "--nu", "0.5", "--eps0", "0.02",
     "--inclusion", "1.25,4.8,0.8,0.5,0.3", "--noise-lateral", "0.01", "--seed", "7", "--out", "phantom"],
    ["strain", "--in", "phantom", "--out", "strain"],
    ["epr", "--in", "strain", "--out", "epr"],
    ["clip", "--in", "phantom", "--out", "clip"],
    ["guo", "--in", "clip", "--out", "guo"],
    ["metrics", "--in", "guo", "--roi-t", "26,30,12,4", "--roi-b", "26,6,12,4", "--out", "metrics/guo.json"],
]

PATH_FLAGS = {"--in", "--out"}


def rebased(argv, root):
    return [str(root / a) if k and argv[k - 1] in PATH_FLAGS else a for k, a in enumerate(argv)]


def build(root: Path) -> dict:
    for argv in STEPS:
        code = main(rebased(argv, root))
        if code != 0:
            raise SystemExit(f"step {argv[0]} failed with exit code {code}")
    expected = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and not path.name.endswith("manifest.json"):
            expected[path.relative_to(root).as_posix()] = hashlib.sha256(path.read_bytes()).hexdigest()
    return {"tool": "elastorefine", "steps": [{"argv": argv} for argv in STEPS], "expected_outputs": expected}


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "manifests" / "e2e_pipeline.json"
    with tempfile.TemporaryDirectory() as tmp:
        manifest = build(Path(tmp))
    target.write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {target} ({len(manifest['expected_outputs'])} hashed outputs)")
