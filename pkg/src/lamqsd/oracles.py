"""Brute-force reference computations used by the verification suites."""
import math
from collections import Counter
from fractions import Fraction
from itertools import product

import numpy as np


def to_xy(pos):
    t = 2 * math.pi * np.asarray(pos, dtype=float)
    return np.stack([np.cos(t), np.sin(t)], axis=-1)


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_intersect(p1, p2, q1, q2):
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _inside_convex(poly, pt):
    # poly counterclockwise; strict interior
    n = len(poly)
    return all(_orient(poly[i], poly[(i + 1) % n], pt) > 0 for i in range(n))


def cartesian_polygons_intersect(a, b):
    """Do the inscribed polygons on circle positions ``a`` and ``b`` meet?

    Works in the plane: any pair of crossing edges, or a vertex of one
    strictly inside the other.
    """
    A = to_xy(np.sort(np.asarray(a, float) % 1.0))
    B = to_xy(np.sort(np.asarray(b, float) % 1.0))
    ea = [(A[i], A[(i + 1) % len(A)]) for i in range(len(A))] if len(A) > 2 else [(A[0], A[1])]
    eb = [(B[i], B[(i + 1) % len(B)]) for i in range(len(B))] if len(B) > 2 else [(B[0], B[1])]
    for p1, p2 in ea:
        for q1, q2 in eb:
            if segments_intersect(p1, p2, q1, q2):
                return True
    if len(A) > 2 and any(_inside_convex(A, v) for v in B):
        return True
    if len(B) > 2 and any(_inside_convex(B, v) for v in A):
        return True
    return False


def side_signature(polygons, pos):
    """For each polygon, which of its edges separates ``pos`` from its interior.

    Points of the circle lie in the same fragment iff their signatures agree.
    """
    p = to_xy([pos])[0]
    sig = []
    for poly in polygons:
        V = to_xy(np.sort(poly))
        n = len(V)
        # interior is to the left of each counterclockwise edge; a chord's
        # two "edges" are the two orientations of the same segment
        side = next((i for i in range(n) if _orient(V[i], V[(i + 1) % n], p) < 0), -1)
        sig.append(side)
    return tuple(sig)


def composition_marginal(k, m):
    """Law of the first child's label by enumerating all compositions."""
    comps = [c for c in product(range(m + 1), repeat=k) if sum(c) == m]
    counts = Counter(1 + c[0] for c in comps)
    return {y: Fraction(v, len(comps)) for y, v in counts.items()}
