"""Time the compiled kernels against the numpy fallback.

Each backend runs in a fresh interpreter because the switch is read at import
time. Usage: ``python benchmarks/bench_kernels.py [--repeat 3]``.
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, time, warnings
import numpy as np
from splinenet._accel import USE_NUMBA
from splinenet.bench import generate
from splinenet.compiler import compile_mars
from splinenet.faber_schauder import fit_kaczmarz
from splinenet.mars import forward_selection
from splinenet.training import TrainConfig, train

REPEAT = {repeat}
warnings.simplefilter("ignore")


def best(fn):
    fn()  # warm-up, includes compilation
    times = []
    for _ in range(REPEAT):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


data2 = generate("sim6", 1000, d=2, seed=0)
model = forward_selection(data2, 5)
net, _ = compile_mars(model, 1e-3)
grid = np.random.default_rng(0).uniform(size=(50_000, 2))
data1 = generate("sim1", 1000, seed=0)
cfg = TrainConfig((1, 5, 5, 5, 1), epochs=20, restarts=1)

out = {{
    "numba": USE_NUMBA,
    "network_eval": best(lambda: net.forward(grid)),
    "mars_forward": best(lambda: forward_selection(data2, 5)),
    "kaczmarz": best(lambda: fit_kaczmarz(data1, 5, 200_000, seed=0)),
    "train_20_epochs": best(lambda: train(data1, cfg)),
}}
print(json.dumps(out))
"""


def run(disable, repeat):
    env = dict(os.environ)
    env["SPLINENET_DISABLE_NUMBA"] = "1" if disable else "0"
    proc = subprocess.run([sys.executable, "-c", WORKLOAD.format(repeat=repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    print(f"{'kernel':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for key in fast:
        if key == "numba":
            continue
        print(f"{key:<18}{fast[key]:>12.4f}{slow[key]:>12.4f}{slow[key] / fast[key]:>9.1f}x")
    if not fast["numba"]:
        print("numba unavailable: both columns used the numpy paths")


if __name__ == "__main__":
    main()
