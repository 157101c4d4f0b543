"""Benchmark: compiled kernels vs the pure numpy fallback.

Times each kernel on the matrix sizes this package actually runs at
(qubits through small qudits), plus an end-to-end QFIM evaluation.

    python3 benchmarks/bench_kernels.py [--repeats 2000]
"""

import argparse
import time

import numpy as np

from qnuis._kernels import available_backends


def _rand_herm_stack(rng, k, n):
    a = rng.standard_normal((k, n, n)) + 1j * rng.standard_normal((k, n, n))
    return (a + np.conj(np.transpose(a, (0, 2, 1)))) / 2


def _rand_state(rng, n):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def bench(fn, args, repeats):
    fn(*args)  # warm up / JIT caches
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; showing fallback timings only")

    rng = np.random.default_rng(0)
    rows = []
    for n in (2, 3, 4, 8, 16):
        k = min(n * n - 1, 8)
        rho = _rand_state(rng, n)
        p = np.sort(np.abs(rng.standard_normal(n))) + 0.1
        p /= p.sum()
        stack = _rand_herm_stack(rng, k, n)
        single = _rand_herm_stack(rng, 1, n)[0]
        m_out = 2 * n
        probs = np.abs(rng.standard_normal(m_out)) + 0.05
        probs /= probs.sum()
        table = rng.standard_normal((m_out, k))
        effects = np.abs(_rand_herm_stack(rng, m_out, n))  # PSD not required here

        cases = [
            ("sld_eig_scale", (p, stack)),
            ("dcomm_eig_scale", (p, single)),
            ("pair_gram", (stack, stack, rho)),
            ("cfim_from_table", (probs, table)),
            ("born_probs", (effects, rho)),
        ]
        for name, fargs in cases:
            timings = {}
            for bname, mod in backends.items():
                timings[bname] = bench(getattr(mod, name), fargs, args.repeats)
            rows.append((name, n, timings))

    print(f"{'kernel':<18} {'n':>3} " +
          " ".join(f"{b + ' (us)':>15}" for b in backends) +
          ("   speedup" if len(backends) == 2 else ""))
    for name, n, timings in rows:
        cells = " ".join(f"{timings[b] * 1e6:15.2f}" for b in backends)
        extra = ""
        if "compiled" in timings and "fallback" in timings:
            extra = f"   {timings['fallback'] / timings['compiled']:7.2f}x"
        print(f"{name:<18} {n:>3} {cells}{extra}")

    # end to end: one SLD Fisher matrix evaluation per backend
    import os
    import subprocess
    import sys
    print("\nend-to-end SLD QFIM on the 3-parameter qubit family:", flush=True)
    snippet = (
        "import time, numpy as np, qnuis;"
        "m = qnuis.zoo_build('bloch-qubit'); th = np.array([0.3, 0.4, 0.5]);"
        "qnuis.sld_qfim(m, th);"
        "t0 = time.perf_counter();\n"
        "for _ in range(500): qnuis.sld_qfim(m, th)\n"
        "print(f'  {qnuis.KERNEL_BACKEND}: '"
        "f'{(time.perf_counter() - t0) / 500 * 1e6:.1f} us/eval')"
    )
    for force in ("0", "1"):
        env = dict(os.environ, QNUIS_PURE_PYTHON=force)
        subprocess.run([sys.executable, "-c", snippet], env=env, check=True)


if __name__ == "__main__":
    main()
