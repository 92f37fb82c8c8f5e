"""Time the same runs under both kernel backends and print the speedup.

Each backend executes in a fresh subprocess because the choice is fixed
at import time (PRIOMAC_BACKEND). Usage:

    python benchmarks/compare_backends.py [--duration-s 300] [--repeat 2]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

CASES = [
    ("frog fs=8 ne=18", {"protocol": "frog", "fragment_size": 8, "n_emergency": 18}),
    ("frog fs=2 ne=18", {"protocol": "frog", "fragment_size": 2, "n_emergency": 18}),
    ("fps ne=18", {"protocol": "fps", "n_emergency": 18}),
]


def child(duration_s: float, repeat: int) -> None:
    import dataclasses

    from priomac.config import SimConfig
    from priomac.core import BACKEND
    from priomac.harness import run_once

    results = {}
    for name, overrides in CASES:
        cfg = dataclasses.replace(SimConfig(seed=1, duration_s=duration_s), **overrides)
        best = None
        for _ in range(repeat):
            t0 = time.perf_counter()
            run_once(cfg)
            dt = time.perf_counter() - t0
            if best is None or dt < best:
                best = dt
        results[name] = best
    print(json.dumps({"backend": BACKEND, "seconds": results}))


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--duration-s", type=float, default=300.0)
    ap.add_argument("--repeat", type=int, default=2)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.child:
        child(args.duration_s, args.repeat)
        return 0

    timings = {}
    for backend in ("pure", "compiled"):
        env = dict(os.environ, PRIOMAC_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__),
             "--child", "--duration-s", str(args.duration_s),
             "--repeat", str(args.repeat)],
            env=env, capture_output=True, text=True,
        )
        if out.returncode != 0:
            sys.stderr.write(out.stderr)
            print(f"{backend}: failed")
            return 1
        payload = json.loads(out.stdout.strip().splitlines()[-1])
        assert payload["backend"] == backend, payload
        timings[backend] = payload["seconds"]

    width = max(len(name) for name, _ in CASES)
    print(f"{'case'.ljust(width)}  {'pure s':>8}  {'compiled s':>10}  {'speedup':>7}")
    for name, _ in CASES:
        p = timings["pure"][name]
        c = timings["compiled"][name]
        print(f"{name.ljust(width)}  {p:8.3f}  {c:10.3f}  {p / c:6.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
