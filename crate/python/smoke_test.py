#!/usr/bin/env python3
"""Smoke test for the `msqp` extension module.

Build the module first, then run this script:

    cargo build -p msqp-py --release
    python3 python/smoke_test.py
"""

import importlib.util
import math
import pathlib
import sys


def load_module():
    root = pathlib.Path(__file__).resolve().parents[1]
    candidates = [
        root / "target" / "release" / "libmsqp.so",
        root / "target" / "debug" / "libmsqp.so",
    ]
    for path in candidates:
        if path.exists():
            spec = importlib.util.spec_from_file_location("msqp", path)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("libmsqp.so not found; run `cargo build -p msqp-py --release` first")


def main():
    msqp = load_module()
    print(f"msqp {msqp.__version__}")

    # Spectrum: 21 energy-ordered levels, labels 0, -1, +1, -2, ...
    q1 = msqp.QuditSpec(10.0, 7.1, 2.0, 0.090)
    levels = q1.spectrum(50.0)
    assert len(levels) == 21
    assert [m for m, _ in levels[:5]] == [0.0, -1.0, 1.0, -2.0, 2.0]
    assert abs(levels[1][1] - 5.7003755) < 1e-6
    # Coupling enhancement: G^0 = sqrt(110) * 0.090 MHz.
    assert abs(q1.coupling(0.0) - math.sqrt(110.0) * 0.090) < 1e-9

    # Space bookkeeping.
    space = msqp.Space(2, 2, 1)
    assert space.dim == 8
    assert space.labels()[0] == (0, 0, 0)

    # Dispersive readout model.
    chi, duration = msqp.dispersive_shift(0.9439, 20.0)
    assert abs(chi - 0.9439**2 / 20.0) < 1e-9
    assert duration > 0.0

    # Pulse compilation of a small circuit.
    nrot, span, table = msqp.compile_circuit("qubits 2\nh 0\ncx 0 1\n", 2.0)
    assert nrot > 0 and span > 0.0
    assert table.splitlines()[0].startswith("channel,")

    # Config plumbing round-trips through the scenario runner entry point.
    cfg = msqp.default_config("tim")
    assert 'scenario = "tim"' in cfg

    print("python smoke test passed")


if __name__ == "__main__":
    main()
