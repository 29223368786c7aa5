"""Compare the compiled SL codec with the pure-Python fallback.

    python benchmarks/bench_sl.py [--ticks N] [--repeat R]

The codec microbenchmark calls both implementations in-process. The
end-to-end figure runs the O3RTAA loop once per backend in a subprocess
(``AGENTACADEMY_PURE=1`` selects the fallback).
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

from agentacademy import sl

SAMPLES = [
    "(agentsToBeTrained (agents (set (agent :name agent1 :type locationAgent))))",
    '(addRule (jessRules (set (jessRule :rule "(defrule rule_6 (and (ozone normal)) => (store ALARM_TYPE 3))"))))',
    "(observation :tick 412 :station s17 :location gandia :raw (NO2NO3 12.5 ozone 190.25 pressure 1004.0)"
    " :cat (NO2NO3 normal ozone high pressure normal))",
]

E2E = (
    "import time; from agentacademy import sl; from agentacademy.o3rtaa.config import ScenarioConfig;"
    "from agentacademy.o3rtaa.simulation import run_simulation; t=time.perf_counter();"
    "run_simulation(ScenarioConfig(seed=1, ticks={ticks}));"
    "print(sl.BACKEND, time.perf_counter()-t)"
)


def codec(repeat: int) -> None:
    if sl._slcore is None:
        print("compiled backend not built; only the fallback is available")
        return
    text = " ".join(SAMPLES * 20).join("()")
    node = sl._py_parse_sl(text)
    rows = [
        ("parse", lambda: sl._py_parse_sl(text), lambda: sl._slcore.parse_sl(text)),
        ("print", lambda: sl._py_print_sl(node), lambda: sl._slcore.print_sl(node)),
    ]
    print(f"codec, {len(text.encode())} byte message, best of 5 x {repeat}")
    for name, py, cy in rows:
        t_py = min(timeit.repeat(py, number=repeat, repeat=5)) / repeat
        t_cy = min(timeit.repeat(cy, number=repeat, repeat=5)) / repeat
        print(f"  {name:<6} python {t_py * 1e6:9.1f} us   cython {t_cy * 1e6:9.1f} us   x{t_py / t_cy:5.2f}")


def end_to_end(ticks: int) -> None:
    print(f"end to end, seed 1, {ticks} ticks")
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("AGENTACADEMY_PURE", None)
        if pure:
            env["AGENTACADEMY_PURE"] = "1"
        out = subprocess.run([sys.executable, "-c", E2E.format(ticks=ticks)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:<7} {float(out[1]):6.2f} s")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ticks", type=int, default=240)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    codec(args.repeat)
    end_to_end(args.ticks)


if __name__ == "__main__":
    main()
