"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--events N]

Each kernel runs on the same inputs under every available backend; outputs
are compared before timings are reported.
"""
import argparse
import time

import numpy as np

from evmaploc import kernels
from evmaploc.synth import SceneSpec, synth_scene


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n_events, seed):
    spec = SceneSpec(n_poses=1, noise_rate=0.3)
    sc = synth_scene(spec, seed)
    K = sc.intrinsics
    ev = sc.events[: n_events] if n_events else sc.events
    yield "tsts", (ev.t, ev.x, ev.y, ev.p, K.width, K.height, 6, 15.0, 1, 0.7), {}, f"{len(ev)} events"

    from evmaploc.geometry import project_points, world_to_camera

    uv, z, front = project_points(world_to_camera(sc.points, sc.poses[0]), K)
    px = np.floor(uv[front] + 0.5).astype(np.int64)
    ok = (px[:, 0] >= 0) & (px[:, 0] < K.width) & (px[:, 1] >= 0) & (px[:, 1] < K.height)
    idx = np.flatnonzero(front)[ok]
    pix = px[ok, 1] * K.width + px[ok, 0]
    yield "zbuffer", (pix, z[idx], idx, K.width * K.height), {}, f"{len(idx)} points"

    rng = np.random.default_rng(seed)
    src = rng.random((K.height, K.width))
    dst = np.roll(src, (2, 3), axis=(0, 1)) + 0.05 * rng.random((K.height, K.width))
    n = 500
    qx, qy = rng.integers(10, K.width - 10, n), rng.integers(10, K.height - 10, n)
    zero = np.zeros(n, dtype=np.int64)
    yield "ncc_search", (src, dst, qx, qy, zero, zero, 7, 8), {}, f"{n} queries, 17x17 search"


def same(a, b):
    return all(np.array_equal(x, y) or np.allclose(x, y, rtol=1e-12, atol=1e-12) for x, y in zip(a, b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--events", type=int, default=200_000, help="TSTS input size (0 = whole window)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")
    print(f"{'kernel':<11} {'input':<26} " + " ".join(f"{b:>10}" for b in backends) + "   speedup")
    for name, a, kw, label in cases(args.events, args.seed):
        fn = getattr(kernels, name)
        res = {b: best_of(lambda: fn(*a, backend=b, **kw), args.repeat) for b in backends}
        outs = [r[1] for r in res.values()]
        if not all(same(outs[0], o) for o in outs[1:]):
            raise SystemExit(f"{name}: backends disagree")
        cols = " ".join(f"{res[b][0] * 1e3:9.1f}ms" for b in backends)
        speed = f"{res['python'][0] / res['cython'][0]:8.1f}x" if "cython" in res else "       -"
        print(f"{name:<11} {label:<26} {cols} {speed}")


if __name__ == "__main__":
    main()
