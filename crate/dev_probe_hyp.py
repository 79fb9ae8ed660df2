#!/usr/bin/env python3
"""Probe f64 feasibility of the terminating 2F1 series and the moment sums."""
import mpmath as mp
import math

mp.mp.dps = 60


def hyp_f64(k, b, c, z):
    """f64 forward-recurrence terminating series."""
    total = 1.0
    term = 1.0
    for i in range(k):
        term *= (-(k - i)) * (b + i) / ((c + i) * (i + 1)) * z
        # note (-k + i) = -(k - i)
        total += term
    return total


def hyp_f64_correct(k, b, c, z):
    total = 1.0
    term = 1.0
    for i in range(k):
        term *= (-k + i) * (b + i) / ((c + i) * (i + 1)) * z
        total += term
    return total


def hyp_exact(k, b, c, z):
    return mp.hyp2f1(-k, b, c, z)


def moment_exact(mf_c, x, e, m, n, kmax=None):
    """Eq. C4 with mpmath."""
    num = mp.mpf(0)
    den = mp.mpf(0)
    k = 0
    prev = None
    while True:
        fk = mp.hyp2f1(-k, x + e, 2 * x, 2)
        fkp = mp.hyp2f1(-(k + m), x + e, 2 * x, 2)
        fkpp = mp.hyp2f1(-(k + n), x + e, 2 * x, 2)
        pref = mp.mpf(2) ** k / mp.factorial(k)
        tnum = pref * (-mf_c) ** (2 * k + m + n) * fkp * fkpp
        tden = pref * mf_c ** (2 * k) * fk * fk
        num += tnum
        den += tden
        if k > 5 and abs(tden) < abs(den) * mp.mpf(10) ** -40:
            break
        k += 1
        if k > 3000:
            break
    return num / den, k


def probe(tag, p, g2, j, eps):
    g = math.sqrt(g2)
    c = math.sqrt(p) / g
    x = (1 + j) / g2
    e = eps / math.sqrt(p * g2)
    print(f"--- {tag}: p={p} g2={g2} j={j} eps={eps:.4f} -> c={c:.4f} x={x:.4f} e={e:.4f}")
    # how big does F get, and how accurate is f64?
    worst_rel = 0
    kmax_needed = int(2 * c * c + 40 + 10 * c)
    for k in range(0, kmax_needed, max(1, kmax_needed // 12)):
        f64v = hyp_f64_correct(k, x + e, 2 * x, 2.0)
        ex = hyp_exact(k, x + e, 2 * x, 2.0)
        rel = abs((f64v - ex) / ex) if ex != 0 else abs(f64v - ex)
        worst_rel = max(worst_rel, rel)
        if k % max(1, kmax_needed // 4) < max(1, kmax_needed // 12):
            print(f"  k={k:4d} F={mp.nstr(ex, 8):>14} f64rel={mp.nstr(rel, 3)}")
    print(f"  worst f64 rel error over k-range: {mp.nstr(worst_rel, 3)}")
    mu_ex, kused = moment_exact(mp.mpf(c), mp.mpf(x), mp.mpf(e), 0, 1)
    print(f"  exact <a> = {mp.nstr(mu_ex, 10)} (terms used ~{kused})")
    return c, x, e


# criterion 1 / section III regime
probe("mf p_thr=2", 12.0, 5.0, 5.0, 5.0 * 0.8 * 1.414)
probe("mf p_thr=-5", 5.0, 5.0, 5.0, 5.0 * 2.2 * 1.435)

# criterion 4 / fig 12a regime, p = 1.2 and p = 2
for p in (1.2, 2.0):
    g2 = 0.02
    mu = math.sqrt((p - 1) / g2)
    probe(f"fig12a p={p}", p, g2, 3.0, 3.0 * mu)
