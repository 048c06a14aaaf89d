"""Run every scenario preset and print one status line per scenario."""

import argparse
import json
from pathlib import Path

from oldrlab.cli import build_config, run_scenario
from oldrlab.config import SCENARIOS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/presets")
    ap.add_argument("--only", nargs="*", default=list(SCENARIOS))
    args = ap.parse_args()
    for name in args.only:
        code, summary = run_scenario(build_config(name), Path(args.out) / name)
        failed = [k for k, v in summary.get("invariants", {}).items() if not v]
        print(f"{name:24s} exit={code} status={summary.get('status'):12s} "
              f"failed_invariants={failed or '-'} wall={summary.get('wall_clock', 0):.1f}s")
        print("    fitted:", json.dumps(summary.get("fitted", {}), default=str))


if __name__ == "__main__":
    main()
