"""Smoke test for the pywarpgeo extension module.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke_test.py
"""

import math

import pywarpgeo as wg


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    e = wg.Expression("x^2 * sin(y)", ["x", "y"])
    value, grad, hess = e.jet([2.0, 0.5])
    assert close(value, 4 * math.sin(0.5))
    assert close(grad[0], 4 * math.sin(0.5)) and close(hess[1][1], -4 * math.sin(0.5))

    sphere = wg.Chart.catalog("sphere2", "s")
    assert close(sphere.scalar_curvature([1.0, 0.3]), 2.0, 1e-8)

    line_x = wg.Chart.catalog("euclidean:1", "x")
    line_y = wg.Chart.catalog("euclidean:1", "y")
    spec = wg.WarpSpec(line_x, line_y, "x1", "y1", 0.5)
    p = [2.0, 3.0]
    assert close(spec.det(p), 27.0)
    assert spec.classify(p)[0] == "riemannian"
    closed, oracle = spec.laplacian("base", p)
    assert close(closed, 1 / 13.5) and close(closed, oracle)
    assert close(spec.harmonicity_defect("base", p), 1 / 6)

    g = spec.metric(p)
    inv = spec.cometric(p)
    for i in range(2):
        for j in range(2):
            entry = sum(inv[i][k] * g[k][j] for k in range(2))
            assert close(entry, 1.0 if i == j else 0.0)

    frame = spec.frame(p)
    for i, u in enumerate(frame):
        for j, v in enumerate(frame):
            ip = sum(u[a] * g[a][b] * v[b] for a in range(2) for b in range(2))
            assert close(ip, 1.0 if i == j else 0.0)

    plane = lambda name, prefix: wg.Chart.custom(
        name, [prefix + "1", prefix + "2"], [(-4.0, 4.0), (-4.0, 4.0)], ["1", "0", "1"]
    )
    h = wg.WarpSpec(plane("px", "x"), plane("py", "y"), "x1", "y1", 1.0, "H")
    q = [2.0, 0.0, 3.0, 0.0]
    oracle_s = h.oracle_scalar_curvature(q)
    assert close(h.scalar_curvature(q, "rederived"), oracle_s, 1e-9)
    print(f"published scalar {h.scalar_curvature(q):.6f}, oracle {oracle_s:.6f}")

    try:
        spec.det([20.0, 3.0])
    except ValueError as err:
        print(f"out-of-domain rejected: {err}")
    else:
        raise AssertionError("expected a domain error")

    print(repr(spec))
    print("smoke test passed")


if __name__ == "__main__":
    main()
