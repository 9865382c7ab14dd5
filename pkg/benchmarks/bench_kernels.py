"""Time the compiled and NumPy kernel backends on the same inputs.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import timeit

import numpy as np

from opsynth import _pykernels, kernels
from opsynth.fock import coherent_amplitudes, make_test_states
from opsynth.optics import BeamSplitterSpec, block_stack


def cases():
    rng = np.random.default_rng(0)
    for T, S in ((10, 8), (16, 16)):
        psi = np.ascontiguousarray(rng.normal(size=(S, T + 1, T + 1)) + 0j)
        blocks = np.ascontiguousarray(block_stack(BeamSplitterSpec(0.7), T))
        yield f"apply_pair T={T} S={S}", "apply_pair", (psi, blocks)
    for D, T in ((6, 12), (14, 20)):
        rho = np.ascontiguousarray(make_test_states("random", {}, D, seed=1).entries)
        chi = np.ascontiguousarray(coherent_amplitudes(0.7, T).amplitudes)
        yield f"event_distribution D={D} T={T}", "event_distribution", (rho, chi, 0.8, 0.6, 0.4, T)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    impls = {"python": _pykernels}
    if kernels.compiled is not None:
        impls["cython"] = kernels.compiled
    print(f"{'case':32s}" + "".join(f"{name:>12s}" for name in impls) + "     speedup")
    for label, fn, inputs in cases():
        best = {}
        for name, mod in impls.items():
            func = getattr(mod, fn)
            number = 3
            best[name] = min(timeit.repeat(lambda: func(*inputs), number=number,
                                           repeat=args.repeat)) / number
        row = f"{label:32s}" + "".join(f"{best[n] * 1e3:10.3f}ms" for n in impls)
        if "cython" in best:
            row += f"{best['python'] / best['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
