"""Benchmark the compiled kernels against the pure-Python fallback.

Two views: microbenchmarks of the three hot operations, and a full nested
search on the bundled lock scenario where those operations dominate.

Run:  python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import random
import time
from importlib import resources

import numpy as np

from dialoplan.core import NrpaParams, initial_state, uniform_policy
from dialoplan.envs.scripted import ScriptedEnvironment, load_scripted_scenario
from dialoplan.kernels import pure
from dialoplan.reward import RewardSpec
from dialoplan.search import nrpa

try:
    from dialoplan.kernels import _native
except ImportError:
    _native = None


def time_op(fn, repeats: int) -> float:
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def micro(repeats: int) -> None:
    rng = np.random.default_rng(0)
    weights = rng.uniform(-3, 3, 8)
    seq = rng.integers(0, 8, size=5).astype(np.int64)
    cases = [
        ("softmax(8)", lambda impl: impl.softmax(weights)),
        ("sample_index(8)", lambda impl: impl.sample_index(weights, 0.37)),
        ("adapt_weights(8, seq=5)", lambda impl: impl.adapt_weights(weights, seq, 1.0, False, 50.0)),
    ]
    print(f"{'operation':<26} {'pure':>12} {'native':>12} {'speedup':>9}")
    for name, call in cases:
        t_pure = time_op(lambda: call(pure), repeats)
        if _native is None:
            print(f"{name:<26} {t_pure * 1e6:>10.2f}us {'n/a':>12} {'n/a':>9}")
            continue
        t_native = time_op(lambda: call(_native), repeats)
        print(
            f"{name:<26} {t_pure * 1e6:>10.2f}us {t_native * 1e6:>10.2f}us "
            f"{t_pure / t_native:>8.1f}x"
        )


def search_benchmark(repeats: int) -> None:
    path = resources.files("dialoplan").joinpath("data/scenarios/scripted_lock.json")
    script = load_scripted_scenario(str(path))
    env = ScriptedEnvironment(script)
    params = NrpaParams(level=2, iterations=10, max_playout_steps=3,
                        stall_stop_enabled=False, solved_stop_enabled=False)
    spec = RewardSpec()

    import dialoplan.kernels as kernels
    import dialoplan.core as core

    def run_with(impl) -> float:
        saved = (kernels.softmax, kernels.sample_index, kernels.adapt_weights,
                 core._kernel_softmax, core._kernel_sample)
        kernels.softmax = impl.softmax
        kernels.sample_index = impl.sample_index
        kernels.adapt_weights = impl.adapt_weights
        core._kernel_softmax = impl.softmax
        core._kernel_sample = impl.sample_index
        import dialoplan.search as search
        saved_search = search.adapt_weights
        search.adapt_weights = impl.adapt_weights
        try:
            start = time.perf_counter()
            for i in range(repeats):
                nrpa(2, uniform_policy(script.scenario.action_space),
                     initial_state(script.scenario), env, params,
                     random.Random(i), spec)
            return (time.perf_counter() - start) / repeats
        finally:
            (kernels.softmax, kernels.sample_index, kernels.adapt_weights,
             core._kernel_softmax, core._kernel_sample) = saved
            search.adapt_weights = saved_search

    t_pure = run_with(pure)
    line = f"{'nrpa level-2 search':<26} {t_pure * 1e3:>10.2f}ms"
    if _native is not None:
        t_native = run_with(_native)
        line += f" {t_native * 1e3:>10.2f}ms {t_pure / t_native:>8.1f}x"
    print(line)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20000,
                        help="microbenchmark repetitions per operation")
    parser.add_argument("--search-repeats", type=int, default=30)
    args = parser.parse_args()
    if _native is None:
        print("note: compiled kernels unavailable; showing pure timings only\n")
    micro(args.repeats)
    search_benchmark(args.search_repeats)


if __name__ == "__main__":
    main()
