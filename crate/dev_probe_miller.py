#!/usr/bin/env python3
"""Validate backward-recurrence (Miller) evaluation of F_k = 2F1(-k, x+e; 2x; 2)
and the full Eq. C3/C4 pipeline in f64, against mpmath."""
import mpmath as mp
import math

mp.mp.dps = 60


def f_array_forward(kmax, x, e):
    """Direct f64 terminating sums (stable only for small 2c^2)."""
    out = []
    b, c = x + e, 2 * x
    for k in range(kmax + 1):
        tot, term = 1.0, 1.0
        for i in range(k):
            term *= (-k + i) * (b + i) / ((c + i) * (i + 1)) * 2.0
            tot += term
        out.append(tot)
    return out


def f_array_miller(kmax, x, e, pad_factor=2.0, pad_add=64):
    """Backward recurrence  k F_{k-1} = (c+k) F_{k+1} + 2e F_k, normalized by F_0 = 1."""
    c = 2 * x
    K = int(pad_factor * (kmax + 1)) + pad_add
    y_up = 0.0     # y_{K+1}
    y = 1e-120     # y_K
    vals = [0.0] * (K + 1)
    vals[K] = y
    for k in range(K, 0, -1):
        y_dn = ((c + k) * y_up + 2 * e * y) / k
        y_up, y = y, y_dn
        vals[k - 1] = y
        if abs(y) > 1e250:
            s = 1e-250
            y_up *= s
            y *= s
            for i in range(k - 1, K + 1):
                vals[i] *= s
    f0 = vals[0]
    return [v / f0 for v in vals[: kmax + 1]]


def moments_f64(p, g2, j, eps, m, n, f):
    """Eq. C4 with precomputed F array; returns <a^dag^m a^n>."""
    g = math.sqrt(g2)
    c = math.sqrt(p) / g
    num = 0.0
    den = 0.0
    pref = 1.0
    cmn = c ** (m + n) * (-1.0) ** (m + n)
    k = 0
    while True:
        tnum = pref * cmn * f[k + m] * f[k + n]
        tden = pref * f[k] * f[k]
        num += tnum
        den += tden
        if k > 2 * c * c + 10 and abs(tden) <= 1e-16 * abs(den):
            break
        k += 1
        if k + max(m, n) >= len(f):
            raise RuntimeError("kmax too small")
        pref *= 2.0 * c * c / (k)
        if abs(pref) > 1e250:
            pref *= 1e-250
            num *= 1e-250
            den *= 1e-250
    return num / den, k


def moment_exact(p, g2, j, eps, m, n):
    g = mp.sqrt(g2)
    c = mp.sqrt(p) / g
    x = (1 + mp.mpf(j)) / g2
    e = eps / mp.sqrt(p * g2)
    num = mp.mpf(0)
    den = mp.mpf(0)
    k = 0
    while True:
        pref = mp.mpf(2) ** k / mp.factorial(k)
        fk = mp.hyp2f1(-k, x + e, 2 * x, 2)
        fkm = mp.hyp2f1(-(k + m), x + e, 2 * x, 2)
        fkn = mp.hyp2f1(-(k + n), x + e, 2 * x, 2)
        num += pref * (-c) ** (2 * k + m + n) * fkm * fkn
        den += pref * c ** (2 * k) * fk * fk
        if k > 10 and abs(pref * fk * fk) < abs(den) * mp.mpf(10) ** -35:
            break
        k += 1
        if k > 2500:
            break
    return num / den


def run_point(tag, p, g2, j, eps, use="auto"):
    g = math.sqrt(g2)
    c = math.sqrt(p) / g
    x = (1 + j) / g2
    e = eps / math.sqrt(p * g2)
    kmax = int(2 * c * c + 40 + 12 * c)
    if use == "auto":
        use = "forward" if 2 * c * c <= 25 else "miller"
    f = (f_array_forward if use == "forward" else f_array_miller)(kmax + 3, x, e)
    # spot-check F accuracy where weights matter
    worst = 0.0
    for k in range(0, kmax, max(1, kmax // 10)):
        ex = mp.hyp2f1(-k, mp.mpf(x) + mp.mpf(e), 2 * mp.mpf(x), 2)
        rel = float(abs((f[k] - ex) / ex)) if ex != 0 else float(abs(f[k] - ex))
        worst = max(worst, rel)
    rows = []
    for (m, n_) in [(0, 1), (0, 2), (1, 1), (0, 3), (1, 2)]:
        v64, kused = moments_f64(p, g2, j, eps, m, n_, f)
        vex = moment_exact(p, g2, j, eps, m, n_)
        rel = float(abs((v64 - vex) / vex)) if vex != 0 else float(abs(v64 - vex))
        rows.append((m, n_, v64, float(vex), rel))
    print(f"--- {tag} [{use}] c={c:.3f} x={x:.1f} e={e:.2f} worstF={worst:.2e}")
    for m, n_, v64, vex, rel in rows:
        print(f"    <ad^{m} a^{n_}> f64={v64:+.12e} exact={vex:+.12e} rel={rel:.2e}")


# criterion 1 / fig 2 points
run_point("pthr=+2 (p=12)", 12.0, 5.0, 5.0, 5.0 * 0.8 * 1.3859)
run_point("pthr=-5 (p=5)", 5.0, 5.0, 5.0, 5.0 * 2.2 * 1.4354)
run_point("pthr=0  (p=10)", 10.0, 5.0, 5.0, 5.0 * 1.2 * 1.41)

# criterion 4 / fig 12a points
for p in (1.2, 1.5, 2.0):
    mu = math.sqrt((p - 1) / 0.02)
    run_point(f"fig12a p={p}", p, 0.02, 3.0, 3.0 * mu)

# small-e + small-c sanity (below threshold, no drive)
run_point("no drive", 0.5, 1.0, 1.0, 0.0)
