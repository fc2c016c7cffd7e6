"""Regenerates the synthetic demonstration CSVs of the scenario fixtures.

Each skill gets a few minimum-jerk demonstrations with a smooth lateral
perturbation, so the demo statistics have non-zero spread mid-motion and
none at the endpoints. Deterministic: fixed seed, fixed formatting.
"""

import math
import os
import random

DT = 0.02
SAMPLES = 150


def min_jerk(a, b, s):
    m = 10 * s**3 - 15 * s**4 + 6 * s**5
    return [a[i] + (b[i] - a[i]) * m for i in range(3)]


def demo(a, b, arc=(0.0, 0.0, 0.0), wobble=(0.0, 0.0, 0.0), quats=None):
    rows = []
    for k in range(SAMPLES):
        s = k / (SAMPLES - 1)
        p = min_jerk(a, b, s)
        bump = math.sin(math.pi * s) ** 2
        for i in range(3):
            p[i] += (arc[i] + wobble[i]) * bump
        row = [k * DT] + p
        if quats is not None:
            row += quats(s)
        rows.append(row)
    return rows


def slerp_z(angle):
    """Rotation about x by `angle * m(s)` (a pouring tilt) as w, x, y, z."""

    def q(s):
        m = 10 * s**3 - 15 * s**4 + 6 * s**5
        h = 0.5 * angle * m
        return [math.cos(h), math.sin(h), 0.0, 0.0]

    return q


def write(path, rows):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    quat = len(rows[0]) == 8
    with open(path, "w") as f:
        f.write("t,x,y,z" + (",qw,qx,qy,qz" if quat else "") + "\n")
        for r in rows:
            f.write(",".join(f"{v:.9f}" for v in r) + "\n")


def skill(dirname, name, a, b, arc=(0, 0, 0), spread=0.01, count=3, quats=None, rng=None):
    for j in range(count):
        w = tuple(rng.uniform(-spread, spread) for _ in range(3)) if count > 1 else (0, 0, 0)
        write(f"{dirname}/demos/{name}_{j}.csv", demo(a, b, arc, w, quats))


def main():
    rng = random.Random(7)
    here = os.path.dirname(os.path.abspath(__file__))

    pmp = os.path.join(here, "pick_move_place")
    skill(pmp, "reach", (0.0, 0.0, 0.3), (0.4, 0.0, 0.05), arc=(0, 0, 0.05), rng=rng)
    skill(pmp, "carry", (0.4, 0.0, 0.05), (0.4, 0.5, 0.15), arc=(0, 0, 0.05), rng=rng)
    skill(pmp, "lower", (0.4, 0.5, 0.15), (0.4, 0.5, 0.05), rng=rng, spread=0.003)

    bf = os.path.join(here, "breakfast")
    skill(bf, "reach", (0.0, 0.0, 0.3), (0.3, 0.2, 0.02), arc=(0, 0, 0.06), rng=rng)
    skill(bf, "transfer", (0.3, 0.2, 0.02), (0.3, -0.2, 0.02), arc=(0, 0, 0.08), rng=rng)
    skill(bf, "yank", (0.5, 0.0, 0.01), (0.5, 0.3, 0.01), rng=rng, spread=0.005)

    tea = os.path.join(here, "tea")
    skill(tea, "reach", (0.0, 0.0, 0.3), (0.35, -0.2, 0.1), arc=(0, 0, 0.05), rng=rng)
    skill(tea, "carry", (0.35, -0.2, 0.1), (0.35, 0.15, 0.2), arc=(0, 0, 0.05), rng=rng)
    skill(tea, "pour", (0.35, 0.15, 0.2), (0.35, 0.15, 0.2), rng=rng, spread=0.004, quats=slerp_z(1.2))


if __name__ == "__main__":
    main()
