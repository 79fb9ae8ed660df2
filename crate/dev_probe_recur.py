#!/usr/bin/env python3
"""Forward three-term recurrence for F_k = 2F1(-k, x+e; 2x; 2) in f64 vs mpmath."""
import mpmath as mp
import math

mp.mp.dps = 60


def f_array_recurrence(kmax, x, e):
    """F_0 = 1, F_1 = -e/x, (c+k) F_{k+1} = k F_{k-1} - 2e F_k with c = 2x."""
    c = 2.0 * x
    out = [1.0, -e / x]
    for k in range(1, kmax):
        out.append((k * out[k - 1] - 2.0 * e * out[k]) / (c + k))
    return out[: kmax + 1]


def check(tag, p, g2, j, eps):
    g = math.sqrt(g2)
    c_ser = math.sqrt(p) / g
    x = (1 + j) / g2
    e = eps / math.sqrt(p * g2)
    kmax = int(2 * c_ser * c_ser + 40 + 12 * c_ser)
    f = f_array_recurrence(kmax + 3, x, e)
    worst = (0.0, 0)
    for k in range(kmax + 1):
        ex = mp.hyp2f1(-k, mp.mpf(x) + mp.mpf(e), 2 * mp.mpf(x), 2)
        if ex == 0:
            rel = float(abs(f[k]))
        else:
            rel = float(abs((f[k] - ex) / ex))
        if rel > worst[0]:
            worst = (rel, k)
    print(f"{tag}: c={c_ser:.3f} x={x} e={e:.2f} kmax={kmax} worst rel={worst[0]:.2e} at k={worst[1]}")


check("pthr=+2 (p=12)", 12.0, 5.0, 5.0, 5.0 * 0.8 * 1.3859)
check("pthr=-5 (p=5)", 5.0, 5.0, 5.0, 5.0 * 2.2 * 1.4354)
check("pthr=0  (p=10)", 10.0, 5.0, 5.0, 5.0 * 1.2 * 1.41)
for p in (1.2, 1.5, 2.0):
    mu = math.sqrt((p - 1) / 0.02)
    check(f"fig12a p={p}", p, 0.02, 3.0, 3.0 * mu)
# fig12b-like: e > x
check("fig12b p=0.3", 0.3, 0.02, 3.0, 4.5 * math.sqrt(0.8 / 0.02))
# no drive
check("no drive", 0.5, 1.0, 1.0, 0.0)
# iteration start mu=1 for fig12a
check("fig12a start", 1.2, 0.02, 3.0, 3.0 * 1.0)
