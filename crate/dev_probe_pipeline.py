#!/usr/bin/env python3
"""End-to-end f64 pipeline: C3 fixed point + C4 moments + C1/C2 analytic skews.
Freezes oracle values for Rust tests."""
import math

SQRT2 = math.sqrt(2.0)


def f_array(kmax, x, e):
    c = 2.0 * x
    out = [1.0, -e / x]
    for k in range(1, kmax + 2):
        out.append((k * out[k - 1] - 2.0 * e * out[k]) / (c + k))
    return out


def kmax_for(c):
    return int(2 * c * c + 60 + 14 * c)


def mean_amp(p, g2, j, eps):
    """Eq. C3: <a> from the terminating-series ratio."""
    g = math.sqrt(g2)
    c = math.sqrt(p) / g
    x = (1 + j) / g2
    e = eps / math.sqrt(p * g2)
    kmax = kmax_for(c)
    f = f_array(kmax + 2, x, e)
    num = 0.0
    den = 0.0
    pref = 1.0  # 2^k c^{2k} / k!
    for k in range(kmax):
        num += -pref * c * f[k] * f[k + 1]
        den += pref * f[k] * f[k]
        pref *= 2.0 * c * c / (k + 1)
        if abs(pref) > 1e250:
            pref *= 1e-250
            num *= 1e-250
            den *= 1e-250
    return num / den


def moment(p, g2, j, eps, m, n):
    g = math.sqrt(g2)
    c = math.sqrt(p) / g
    x = (1 + j) / g2
    e = eps / math.sqrt(p * g2)
    kmax = kmax_for(c)
    f = f_array(kmax + max(m, n) + 2, x, e)
    num = 0.0
    den = 0.0
    pref = 1.0
    sgn = (-1.0) ** (m + n)
    cmn = c ** (m + n)
    for k in range(kmax):
        num += pref * sgn * cmn * f[k + m] * f[k + n]
        den += pref * f[k] * f[k]
        pref *= 2.0 * c * c / (k + 1)
        if abs(pref) > 1e250:
            pref *= 1e-250
            num *= 1e-250
            den *= 1e-250
    return num / den


def state_moments(p, g2, j, eps):
    mu = moment(p, g2, j, eps, 0, 1)
    a2 = moment(p, g2, j, eps, 0, 2)
    nb = moment(p, g2, j, eps, 1, 1)
    a3 = moment(p, g2, j, eps, 0, 3)
    ad2 = moment(p, g2, j, eps, 1, 2)
    m2 = a2 - mu * mu
    n2 = nb - mu * mu
    gam = a3 - 3 * mu * a2 + 2 * mu**3
    kap = ad2 - 2 * mu * nb - mu * a2 + 2 * mu**3
    return dict(
        mu=mu, m=m2, n=n2, gamma=gam, kappa=kap,
        mean_x=SQRT2 * mu, var_x=n2 + m2 + 0.5, var_p=n2 - m2 + 0.5,
        skS=(gam + 3 * kap) / SQRT2, skC=(-gam + kap) / SQRT2,
    )


def self_consistent(p, g2, j, gf, mu0, iters):
    mu = mu0
    for _ in range(iters):
        mu = mean_amp(p, g2, j, j * gf * mu)
    res = abs(mu - mean_amp(p, g2, j, j * gf * mu))
    return mu, res


def skews_analytic(mu, p, g2, j, vx_no, vp_no):
    skS = -SQRT2 * g2 * mu / (3 * g2 * mu * mu + 1 + j - p) * vx_no * (3 * vx_no + 1)
    skC = -SQRT2 * g2 * mu / (5 * g2 * mu * mu + 3 + 3 * j + p) * (
        2 * vp_no - vx_no + vp_no * (2 * vx_no + vp_no)
    )
    return skS, skC


print("== criterion 1 oracle side: p_thr sweep, g2=5, j=5, p=p_thr+10 ==")
for pthr in (-5, -3, -1, 0, 1, 2, 3):
    p = pthr + 10.0
    gf = (1 - pthr + 5.0) / 5.0
    mu, res = self_consistent(p, 5.0, 5.0, gf, 1.0, 2000)
    sm = state_moments(p, 5.0, 5.0, 5.0 * gf * mu)
    print(
        f"pthr={pthr:+d}: mu={mu:.10f} res={res:.2e} X={sm['mean_x']:.6f} "
        f"vX={sm['var_x']:.6f} vP={sm['var_p']:.6f} skS={sm['skS']:+.6f} skC={sm['skC']:+.6f}"
    )

print("== criterion 4: fig12a, g2=0.02, j=3, pthr=1 (eps = j mu) ==")
for dp in (0.2, 0.4, 0.6, 0.8, 1.0):
    p = 1.0 + dp
    mu, res = self_consistent(p, 0.02, 3.0, 1.0, 1.0, 1000)
    sm = state_moments(p, 0.02, 3.0, 3.0 * mu)
    vx_no = 1.0 / (2 * (2 * p - 2 + 3))
    vp_no = -1.0 / (2 * (2 * p + 3))
    ss, cc = skews_analytic(mu, p, 0.02, 3.0, vx_no, vp_no)
    rel_s = abs(sm["skS"] - ss) / abs(ss)
    rel_c = abs(sm["skC"] - cc) / abs(cc)
    print(
        f"p={p:.1f}: mu={mu:.6f} X={sm['mean_x']:.4f} skS_C4={sm['skS']:+.6e} "
        f"skS_C1={ss:+.6e} rel={rel_s:.3f} | skC_C4={sm['skC']:+.6e} skC_C2={cc:+.6e} rel={rel_c:.3f}"
    )

print("== frozen oracle points for Rust tests ==")
for (p, g2, j, eps) in [(12.0, 5.0, 5.0, 4.0), (5.0, 5.0, 5.0, 11.0), (1.5, 0.02, 3.0, 15.0)]:
    sm = state_moments(p, g2, j, eps)
    print(f"p={p} g2={g2} j={j} eps={eps}:")
    for k, v in sm.items():
        print(f"   {k} = {v!r}")

print("== approach X~10 as p->2 (g2=0.02, j=3, pthr=1) ==")
mu, _ = self_consistent(2.0, 0.02, 3.0, 1.0, 1.0, 1000)
print(f"p=2: X = {SQRT2*mu:.4f}")

print("== no-drive below threshold: mu -> 0 ==")
mu, res = self_consistent(0.5, 1.0, 1.0, 0.0, 1.0, 200)
print(f"mu={mu:.3e} res={res:.1e}")
