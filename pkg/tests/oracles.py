"""Reference computations that share no code path with the package."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def gauss_seidel_temperatures(n, length, a1, a2, k_b, h, ambient, r0, alpha, u_i,
                              omega=0.9, tol=1e-12, max_sweeps=200_000):
    """Damped Gauss-Seidel on the nodal balances written out by hand.

    Node i: u_I (R0 + alpha T_i) = kc * sum_nb (T_i - T_j) + h A_i (T_i - T_a)
    with A_i = 2 A2, plus A1 on the two end modules.
    """
    kc = k_b * a1 / length
    areas = [2 * a2 + (a1 if i in (0, n - 1) else 0.0) for i in range(n)]
    temps = [ambient] * n
    for _ in range(max_sweeps):
        change = 0.0
        for i in range(n):
            nbrs = [j for j in (i - 1, i + 1) if 0 <= j < n]
            num = u_i * r0 + kc * sum(temps[j] for j in nbrs) + h * areas[i] * ambient
            den = kc * len(nbrs) + h * areas[i] - alpha * u_i
            new = (1 - omega) * temps[i] + omega * num / den
            change = max(change, abs(new - temps[i]))
            temps[i] = new
        if change < tol:
            return np.array(temps)
    raise RuntimeError("Gauss-Seidel did not converge")


def hand_matrix(n, length, a1, a2, k_b, h):
    """B(u_f) for the three balance types, entry by entry."""
    kc = k_b * a1 / length
    rows = []
    for i in range(n):
        row = [0.0] * (n + 1)
        if i == 0:
            # h A1 (T1 - Ta) + 2 h A2 (T1 - Ta) + kc (T1 - T2)
            row[0] = h * a1 + 2 * h * a2 + kc
            row[1] = -kc
            row[n] = -(h * a1 + 2 * h * a2)
        elif i == n - 1:
            # kc (TN - TN-1) + h A1 (TN - Ta) + 2 h A2 (TN - Ta)
            row[i] = kc + h * a1 + 2 * h * a2
            row[i - 1] = -kc
            row[n] = -(h * a1 + 2 * h * a2)
        else:
            # kc (Ti - Ti-1) + kc (Ti - Ti+1) + 2 h A2 (Ti - Ta)
            row[i] = 2 * kc + 2 * h * a2
            row[i - 1] = -kc
            row[i + 1] = -kc
            row[n] = -2 * h * a2
        rows.append(row)
    return np.array(rows)


def golden_section_policy(a, b, c, iters=400):
    """Minimise (a + b x)^2 + c x^2 by golden section with exact objective values."""
    fa, fb, fc = Fraction(a), Fraction(b), Fraction(c)

    def f(x):
        x = Fraction(x)
        return (fa + fb * x) ** 2 + fc * x * x

    lo, hi = -1.0, 1.0
    while f(lo) <= f(lo / 2) or f(hi) <= f(hi / 2):
        lo, hi = 2 * lo, 2 * hi
    inv_phi = (math.sqrt(5) - 1) / 2
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = f(x2)
        if hi - lo <= 4 * math.ulp(max(abs(lo), abs(hi), 1e-300)):
            break
    x = (lo + hi) / 2
    return a + b * x, x


def vertex_enumeration(c, a_eq, b_eq, lower, upper):
    """Minimum of c @ x over the vertices of a bounded polytope, or None if empty.

    Every vertex has at least n - rank(A) coordinates at a bound; try every such
    choice and solve the square remainder.
    """
    c = np.asarray(c, float)
    a_eq = np.asarray(a_eq, float).reshape(-1, len(c))
    b_eq = np.asarray(b_eq, float)
    n, m = len(c), a_eq.shape[0]
    best = None
    for fixed in itertools.combinations(range(n), n - m):
        free = [j for j in range(n) if j not in fixed]
        for bounds in itertools.product((0, 1), repeat=len(fixed)):
            x = np.zeros(n)
            for j, side in zip(fixed, bounds):
                x[j] = lower[j] if side == 0 else upper[j]
            if free:
                sub = a_eq[:, free]
                if abs(np.linalg.det(sub)) < 1e-12:
                    continue
                x[free] = np.linalg.solve(sub, b_eq - a_eq[:, list(fixed)] @ x[list(fixed)])
            if np.any(x < np.asarray(lower) - 1e-9) or np.any(x > np.asarray(upper) + 1e-9):
                continue
            if m and np.max(np.abs(a_eq @ x - b_eq)) > 1e-9:
                continue
            value = float(c @ x)
            if best is None or value < best:
                best = value
    return best


def enumerate_binaries(c, a_eq, b_eq, lower, upper, binaries):
    """Brute-force MILP optimum: fix every binary pattern, enumerate LP vertices.

    Fixed binaries move to the right-hand side so only the continuous part is
    enumerated.
    """
    c = np.asarray(c, float)
    a_eq = np.asarray(a_eq, float)
    binaries = list(binaries)
    rest = [j for j in range(len(c)) if j not in binaries]
    lo, up = np.asarray(lower, float)[rest], np.asarray(upper, float)[rest]
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=len(binaries)):
        bits = np.array(bits)
        rhs = np.asarray(b_eq, float) - a_eq[:, binaries] @ bits
        value = vertex_enumeration(c[rest], a_eq[:, rest], rhs, lo, up)
        if value is not None:
            value += float(c[binaries] @ bits)
            if best is None or value < best:
                best = value
    return best
