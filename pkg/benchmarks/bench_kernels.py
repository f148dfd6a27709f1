"""Compare the numba kernels with the numpy fallback.

Each backend runs in its own interpreter because AWB_NUMBA is read at import time.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--max-n 7]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from awb import _kernels, models
from awb.checker import bfs_deadlocks, misa_deadlocks

repeat, max_n = int(sys.argv[1]), int(sys.argv[2])
# warm up (numba compiles or loads its cache here)
misa_deadlocks(models.philosophers(2), "atomic")
bfs_deadlocks(models.philosophers(2))
cases = [("bfs", f"phil{n}", models.philosophers(n), "all") for n in range(4, max_n + 1)]
cases += [("misa", f"phil{n}_double", models.philosophers(n, "doubleCover"), "atomic")
          for n in range(4, max_n)]
cases += [("bfs", "scheduler4", models.scheduler(4), "all")]
rows = []
for algo, name, s, mode in cases:
    fn = bfs_deadlocks if algo == "bfs" else misa_deadlocks
    best, explored = float("inf"), 0
    for _ in range(repeat):
        t = time.perf_counter()
        explored = fn(s, mode).explored
        best = min(best, time.perf_counter() - t)
    rows.append([algo, name, explored, best])
print(json.dumps({"numba": _kernels.USING_NUMBA, "rows": rows}))
"""


def run(flag: str, repeat: int, max_n: int) -> dict:
    env = dict(os.environ, AWB_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat), str(max_n)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--max-n", type=int, default=7)
    args = ap.parse_args()
    jit, ref = run("1", args.repeat, args.max_n), run("0", args.repeat, args.max_n)
    if not jit["numba"]:
        print("numba is not importable; both columns use the numpy fallback")
    print(f"{'algo':5} {'system':14} {'explored':>9} {'numba s':>9} {'numpy s':>9} {'speedup':>8}")
    for (algo, name, n1, t1), (_, _, n0, t0) in zip(jit["rows"], ref["rows"]):
        assert n1 == n0, (name, n1, n0)
        print(f"{algo:5} {name:14} {n1:9d} {t1:9.4f} {t0:9.4f} {t0 / max(t1, 1e-9):8.1f}x")


if __name__ == "__main__":
    main()
