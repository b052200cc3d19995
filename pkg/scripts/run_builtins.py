"""Run every shipped scenario and print its reference checks."""

import argparse
import time
from pathlib import Path

from twophoton.scenario import BUILTINS, format_report, load_scenario, run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs", help="parent directory for per-scenario outputs")
    ap.add_argument("names", nargs="*", default=list(BUILTINS))
    args = ap.parse_args()
    failed = []
    for name in args.names:
        t0 = time.perf_counter()
        rep = run_scenario(load_scenario(name), Path(args.out) / name)
        dt = time.perf_counter() - t0
        print(format_report(rep).rstrip())
        print(f"-- {name}: {'ok' if rep.passed else 'FAILED'} in {dt:.1f} s\n")
        if not rep.passed:
            failed.append(name)
    if failed:
        raise SystemExit(f"failed: {', '.join(failed)}")


if __name__ == "__main__":
    main()
