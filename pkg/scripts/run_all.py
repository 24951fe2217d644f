#!/usr/bin/env python3
"""Run every experiment config in order and collect outputs under results/.

    python scripts/make_configs.py [--quick]
    python scripts/run_all.py [--configs configs] [--results results]

Full-scale runs take tens of minutes (the 4000-seed scatter dominates);
--quick configs finish in a few minutes.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from qcl.cli import main as qcl_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--configs", default="configs")
    parser.add_argument("--results", default="results")
    args = parser.parse_args()
    cfg_dir = Path(args.configs)
    manifest = json.loads((cfg_dir / "manifest.json").read_text())
    failures = []
    for name, command in manifest.items():
        out = Path(args.results) / name
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        print(f"=== {command} <- {name}.json")
        rc = qcl_main([command, "--config", str(cfg_dir / f"{name}.json"),
                       "--out", str(out)])
        print(f"=== {name}: exit {rc} in {time.perf_counter() - t0:.1f}s")
        if rc != 0:
            failures.append(name)
    if failures:
        print(f"failed experiments: {failures}")
        return 1
    print("all experiments completed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
