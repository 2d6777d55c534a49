"""Run every example config in scripts/configs through the CLI.

Usage: python3 scripts/run_all.py [OUTPUT_ROOT]
"""

import sys
import time
from pathlib import Path

from slipstokes.cli import main

HERE = Path(__file__).resolve().parent


def run_all(root: Path) -> int:
    worst = 0
    for cfg in sorted((HERE / "configs").glob("*.json")):
        kind = cfg.stem.replace("_", "-")
        t0 = time.perf_counter()
        rc = main([kind, "--config", str(cfg), "--out", str(root / cfg.stem)])
        print(f"== {kind}: exit {rc} in {time.perf_counter() - t0:.1f}s\n")
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(run_all(Path(sys.argv[1] if len(sys.argv) > 1 else "runs")))
