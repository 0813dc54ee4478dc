#!/usr/bin/env python3
"""Compare the compiled kernel core against the pure-Python fallback.

Times each hot-loop kernel in both backends (they are importable side by
side regardless of which one the package selected), then measures
end-to-end mission throughput per backend in subprocesses so the import
switch (``INPIPE_PURE=1``) takes effect.

Usage:
    python3 benchmarks/bench_kernels.py [--number N] [--full-mission]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

from inpipe.kernels import _pure

try:
    from inpipe.kernels import _core
except ImportError:
    _core = None

MISSION_SNIPPET = """
import json, sys, time
from inpipe import kernels
from inpipe.mission import run_mission
from inpipe.pipe_world import load_scenario

if {full!r}:
    from importlib import resources
    text = resources.files("inpipe").joinpath(
        "scenarios/default_100m.json").read_text(encoding="utf-8")
else:
    text = json.dumps({{
        "segments": [{{"inner_diameter_mm": 1000.0, "length_mm": 8000.0}}],
        "joints": [{{"axial_pos_mm": 5000.0}}],
        "seed": 7,
        "sensor_noise_mm": 5.0,
    }})
scenario = load_scenario(text)
start = time.perf_counter()
report, world = run_mission(scenario)
elapsed = time.perf_counter() - start
print(json.dumps({{
    "backend": kernels.backend_name(),
    "ticks": world.state.tick_index,
    "seconds": elapsed,
    "state": report.final_state,
    "hash": report.final_state_hash,
}}))
"""


def _workloads():
    """(name, callable-factory) pairs; the factory binds one backend."""
    levels = [1.0] * 72
    fills = [0] * 72
    required = [19_634_954] * 72

    def bind(impl):
        return {
            "step_pose": lambda: impl.step_pose(
                1234.5, 3.2, 0.01, 180.0, 220.0, 400.0, 0.02
            ),
            "solve_center": lambda: impl.solve_center(510.0, 500.0, 500.0, 500.0),
            "ring_forces": lambda: impl.ring_forces(
                10.0, 10.0, 10.0, 20.0, -200.0, 0.0
            ),
            "transmissibility": lambda: impl.transmissibility(5.0, 0.3),
            "clean_decay": lambda: impl.clean_decay(levels, 0, 72, 0.999999),
            "inject_spread": lambda: impl.inject_spread(fills, required, 0, 1000),
        }

    return bind


def bench_kernels(number: int) -> None:
    bind = _workloads()
    pure_calls = bind(_pure)
    core_calls = bind(_core) if _core is not None else None

    print(f"{'kernel':<18} {'pure us/op':>12} {'compiled us/op':>15} {'speedup':>9}")
    for name, pure_fn in pure_calls.items():
        pure_us = min(timeit.repeat(pure_fn, number=number, repeat=5)) / number * 1e6
        if core_calls is None:
            print(f"{name:<18} {pure_us:>12.3f} {'n/a':>15} {'n/a':>9}")
            continue
        core_us = (
            min(timeit.repeat(core_calls[name], number=number, repeat=5))
            / number
            * 1e6
        )
        print(
            f"{name:<18} {pure_us:>12.3f} {core_us:>15.3f} "
            f"{pure_us / core_us:>8.1f}x"
        )


def bench_mission(full: bool) -> None:
    snippet = MISSION_SNIPPET.format(full=full)
    rows = []
    for pure in (False, True):
        env = dict(os.environ)
        if pure:
            env["INPIPE_PURE"] = "1"
        else:
            env.pop("INPIPE_PURE", None)
        out = subprocess.run(
            [sys.executable, "-c", snippet],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        rows.append(json.loads(out.stdout))

    label = "packaged 100 m scenario" if full else "one-joint 8 m scenario"
    print(f"\nmission throughput ({label}):")
    print(f"{'backend':<10} {'ticks':>8} {'seconds':>9} {'ticks/s':>10}")
    for row in rows:
        print(
            f"{row['backend']:<10} {row['ticks']:>8} {row['seconds']:>9.2f} "
            f"{row['ticks'] / row['seconds']:>10.0f}"
        )
    if rows[0]["hash"] != rows[1]["hash"]:
        print("WARNING: backends disagree on the final state hash!")
        sys.exit(1)
    print(f"final state hashes match ({rows[0]['state']})")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--number", type=int, default=20000, help="calls per kernel timing sample"
    )
    parser.add_argument(
        "--full-mission",
        action="store_true",
        help="benchmark the packaged 100 m scenario instead of the small one",
    )
    args = parser.parse_args()

    if _core is None:
        print("note: compiled core unavailable; timing the fallback only\n")
    bench_kernels(args.number)
    bench_mission(args.full_mission)


if __name__ == "__main__":
    main()
