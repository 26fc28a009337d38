#!/usr/bin/env python3
"""Arbitrary-precision reference values for the portrait glyph formulas.

Inputs are random doubles; mpmath evaluates on their exact binary values at
60 decimal digits and the result is rounded once to the nearest double.
Regenerate with:

    python3 crates/core/tests/oracles/formula_oracle.py > crates/core/tests/data/formula_oracle.json
"""
import json
import random

import mpmath

mpmath.mp.dps = 60
rng = random.Random(20201101)
N = 100


def cfg():
    rc = rng.uniform(2.0, 30.0)
    return {
        "core_radius": rc,
        "crown_radius": rc + rng.uniform(5.0, 60.0),
        "base_height": rng.uniform(0.5, 10.0),
        "scale_a": rng.uniform(0.0, 3.0),
        "scale_b": rng.uniform(0.01, 0.5),
    }


def mp(x):
    return mpmath.mpf(x)


def protein_height():
    out = []
    for _ in range(N):
        c = cfg()
        f = rng.choice([rng.randint(1, 50), rng.randint(1, 10**7)])
        h = mp(c["base_height"]) + mp(c["crown_radius"]) * (mp(c["scale_a"]) + mpmath.log(f)) * mp(c["scale_b"])
        out.append({"cfg": c, "f": f, "expected": float(h)})
    return out


def arc_angle():
    out = []
    for _ in range(N):
        mx = rng.uniform(1.0, 1e6)
        value = rng.uniform(0.0, mx)
        n = rng.choice([1, 2])
        theta = rng.uniform(0.01, 0.5)
        a = mp(value) / mp(mx) * 2 * mpmath.pi / n + mp(theta) / n
        out.append({"value": value, "max": mx, "n": n, "min_arc": theta, "expected": float(a)})
    return out


def arc_length():
    out = []
    for _ in range(N):
        c = cfg()
        angle = rng.uniform(0.0, 7.0)
        m = rng.choice([1, 2, 3])
        length = (mp(c["crown_radius"]) - mp(c["core_radius"])) / m * mp(angle)
        out.append({"cfg": c, "angle": angle, "m": m, "expected": float(length)})
    return out


def literal_wave():
    out = []
    for _ in range(N):
        c = cfg()
        angle = rng.uniform(0.0, 7.0)
        share = rng.uniform(0.0, 1.0)
        m = rng.choice([1, 2, 3])
        span = mp(c["crown_radius"]) - mp(c["core_radius"])
        r = span / 3 * abs(mpmath.cos(mp(angle) * mp(share))) + span / m
        out.append({"cfg": c, "angle": angle, "share": share, "m": m, "expected": float(r)})
    return out


print(json.dumps({
    "protein_height": protein_height(),
    "arc_angle": arc_angle(),
    "arc_length": arc_length(),
    "literal_wave": literal_wave(),
}, indent=1))
