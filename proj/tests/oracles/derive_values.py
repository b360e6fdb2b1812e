#!/usr/bin/env python3
"""Independent reference values for the unit tests.

Everything here is computed without the C++ library: exact rationals where the
arithmetic allows it, numpy/mpmath/scipy otherwise. Run without arguments to
print the values, with --write to refresh expected_values.json, and with --check
to confirm the frozen file still matches a fresh computation.
"""

import argparse
import json
import math
import sys
from fractions import Fraction as F
from pathlib import Path

import mpmath
import numpy as np
from scipy import optimize, stats

HERE = Path(__file__).resolve().parent
FROZEN = HERE / "expected_values.json"

EXAMPLE_A = [[F(1, 3), F(1, 3), F(1, 3)], [F(1, 2), F(1, 2), F(0)], [F(0), F(1, 4), F(3, 4)]]


def fl(x):
    return float(x)


def inf_norm_rows(m):
    return max(sum(abs(v) for v in row) for row in m)


def rho(a, eps):
    return max(abs(a[i][i] - eps[i]) + 1 - a[i][i] for i in range(len(a)))


def dobrushin(m):
    n = len(m)
    return max(sum(abs(m[i][k] - m[j][k]) for k in range(n)) for i in range(n) for j in range(n)) / 2


def averaging(a, eps):
    n = len(a)
    return [[a[i][j] + eps[i] * (F(1, n) - (1 if i == j else 0)) for j in range(n)] for i in range(n)]


def matvec(m, v):
    return [sum(m[i][j] * v[j] for j in range(len(v))) for i in range(len(m))]


def perron_left(b, iters=5000):
    """Left fixed vector of a stochastic matrix by power iteration on B^T."""
    bt = np.array(b, dtype=float).T
    v = np.full(bt.shape[0], 1.0 / bt.shape[0])
    for _ in range(iters):
        v = bt @ v
        v /= v.sum()
    return v


def philox4x32_10(ctr, key):
    m0, m1, w0, w1 = 0xD2511F53, 0xCD9E8D57, 0x9E3779B9, 0xBB67AE85
    mask = 0xFFFFFFFF
    c = list(ctr)
    k = list(key)
    for _ in range(10):
        p0 = m0 * c[0]
        p1 = m1 * c[2]
        hi0, lo0 = p0 >> 32, p0 & mask
        hi1, lo1 = p1 >> 32, p1 & mask
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0]
        k = [(k[0] + w0) & mask, (k[1] + w1) & mask]
    return c


def oscillator(horizon, c=0.1, lower=0.25, upper=0.75, start=0.5):
    eps, flips = [], []
    e, w = start, 1
    for t in range(1, horizon + 1):
        e = e + w * (c / t)
        eps.append(e)
        nxt = c / (t + 1)
        if w > 0 and e + nxt > upper:
            w = -1
            flips.append(t)
        elif w < 0 and e - nxt < lower:
            w = 1
            flips.append(t)
    return eps, flips


def signum_cycle(eps, sigma, x0, steps):
    x = x0
    ys = []
    for _ in range(steps):
        d = sigma - x
        x = x + eps * (1 if d > 0 else -1 if d < 0 else 0)
        ys.append(x - sigma)
    return ys


def compute():
    out = {}

    out["matrix_inf_norm_mixed_signs"] = fl(inf_norm_rows([[F(-1, 2), F(1, 4)], [F(1, 10), F(1, 5)]]))
    out["weighted_inf_norm_4_m6_over_2_2"] = fl(max(F(4) / 2, F(6) / 2))
    out["contraction_example_thirds"] = fl(rho(EXAMPLE_A, [F(1, 3), F(1, 2), F(3, 4)]))
    out["contraction_example_target_rates"] = fl(rho(EXAMPLE_A, [F(3, 10), F(1, 2), F(7, 10)]))
    out["dobrushin_example"] = fl(dobrushin(EXAMPLE_A))
    out["dobrushin_identity2"] = fl(dobrushin([[F(1), F(0)], [F(0), F(1)]]))

    a2 = [[F(3, 5), F(2, 5)], [F(3, 10), F(7, 10)]]
    e2 = [F(2, 5), F(1, 5)]
    b2 = averaging(a2, e2)
    out["averaging_map_2x2"] = [[fl(v) for v in row] for row in b2]
    out["step_average_2x2_x10"] = [fl(v) for v in matvec(b2, [F(1), F(0)])]

    b3 = averaging(EXAMPLE_A, [F(3, 10), F(1, 2), F(7, 10)])
    out["averaging_map_example"] = [[fl(v) for v in row] for row in b3]
    out["product_limit_example_nu"] = perron_left(b3).tolist()
    out["average_consensus_nu"] = perron_left(averaging([[F(7, 10), F(3, 10)], [F(1, 5), F(4, 5)]],
                                                        [F(1, 5), F(1, 2)])).tolist()

    out["step_base_example_from_zero"] = [fl(F(3, 10)), fl(F(1, 2)), fl(F(7, 10))]
    out["step_noisy_scalar"] = fl(1 + F(1, 2) * (2 + F(1, 10) - 1))
    out["step_pure_noise_scalar"] = fl(0 + F(1, 2) * (1 - 0))
    out["step_nonlinear_tanh_half"] = float(mpmath.tanh(1) / 2)

    out["base_rates_first_violation"] = next(
        i for i, (a, e) in enumerate(zip([EXAMPLE_A[i][i] for i in range(3)], [F(7, 10), F(1, 2), F(7, 10)]))
        if not (0 < e < 2 * a))
    out["average_rate_bounds_2x2"] = [fl(2 * a2[0][0]), fl(2 * a2[1][1])]

    out["product_harmonic_999"] = fl(math.prod(F(t, t + 1) for t in range(1, 1000)))
    mpmath.mp.dps = 40
    out["product_exp_inverse_square_1e4"] = float(mpmath.exp(-mpmath.nsum(lambda k: 1 / k**2, [1, 10**4])))
    out["product_exp_inverse_square_1e5"] = float(mpmath.exp(-mpmath.nsum(lambda k: 1 / k**2, [1, 10**5])))
    out["product_exp_inverse_square_limit"] = float(mpmath.exp(-mpmath.pi**2 / 6))

    s = F(0)
    sup = F(0)
    for t in range(1, 1000):
        s = F(t, t + 1) * (1 + s)
        sup = max(sup, s)
    out["product_sums_harmonic_sup_999"] = fl(sup)
    out["product_sums_half_sup_60"] = fl(1 - F(1, 2**60))

    eps_osc, flips = oscillator(10**6)
    out["variation_oscillator_sum_1e3"] = float(sum(mpmath.mpf(1) / (10 * t) for t in range(2, 1001)))
    out["variation_inverse_square_sum_1e4"] = float(sum(mpmath.mpf(1) / t**2 for t in range(2, 10001)))
    out["oscillator_flips_first3"] = flips[:3]
    out["oscillator_min_1e6"] = min(eps_osc)
    out["oscillator_max_1e6"] = max(eps_osc)
    out["oscillator_checkpoints"] = {str(t): eps_osc[t - 1] for t in (1, 2, 10, 100, 1000, 10**4, 10**5, 10**6)}

    out["nonlinear_rho_interval"] = fl(max(abs(F(3, 10) - d) for d in (F(1, 5), F(2, 5))) + 1 - F(3, 10))

    pts = np.array([[0.0, 0.0], [2.0, 2.0]])
    out["moments_two_points_cov"] = np.cov(pts, rowvar=False, ddof=1).tolist()
    out["w1_0_1_vs_0_3"] = float(stats.wasserstein_distance([0, 1], [0, 3]))
    out["w1_unequal_sizes"] = float(stats.wasserstein_distance([0.0, 1.0, 2.0], [0.5, 3.0]))
    out["ks_single_point_median"] = 0.5
    res = optimize.minimize_scalar(lambda x: -abs(stats.norm.cdf(x) - stats.cauchy.cdf(x)),
                                   bounds=(0, 5), method="bounded", options={"xatol": 1e-12})
    out["sup_normal_vs_cauchy_cdf"] = float(-res.fun)
    out["rank_one_score_099"] = float((1 - 0.99) / (1 + 0.99))
    out["ks_critical_1e4_alpha_001"] = float(stats.kstwobign.isf(0.01) / 100)

    nu = np.array(out["averaging_map_2x2"][0])
    c = np.vstack([nu, nu])
    e = np.diag([0.4, 0.2])
    out["clt_target_2x2_identity"] = (c @ e @ np.eye(2) @ e.T @ c.T).tolist()
    nu3 = np.array(out["average_consensus_nu"])
    c3 = np.vstack([nu3, nu3])
    e3 = np.diag([0.2, 0.5])
    out["clt_target_average_consensus"] = (c3 @ e3 @ e3.T @ c3.T).tolist()

    out["consensus_time_bound_rho07"] = math.ceil(math.log(1e-6) / math.log(0.7))
    ys = signum_cycle(0.4, 1.0, 2.0, 60)
    out["signum_tail_values"] = sorted(set(round(y, 12) for y in ys[-10:]))

    out["cauchy_scale_half_200"] = fl(1 - F(1, 2**200))
    out["cauchy_scale_half_3"] = fl(1 - F(1, 8))

    out["philox_kat"] = [
        {"ctr": [0, 0, 0, 0], "key": [0, 0], "out": philox4x32_10([0, 0, 0, 0], [0, 0])},
        {"ctr": [0xFFFFFFFF] * 4, "key": [0xFFFFFFFF] * 2,
         "out": philox4x32_10([0xFFFFFFFF] * 4, [0xFFFFFFFF] * 2)},
        {"ctr": [0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344], "key": [0xA4093822, 0x299F31D0],
         "out": philox4x32_10([0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344], [0xA4093822, 0x299F31D0])},
    ]
    published = [[0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8],
                 [0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD],
                 [0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1]]
    assert [k["out"] for k in out["philox_kat"]] == published, "philox reference disagrees with Random123 vectors"
    return out


def same(a, b, tol=1e-13):
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(same(a[k], b[k], tol) for k in a)
    if isinstance(a, list):
        return isinstance(b, list) and len(a) == len(b) and all(same(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= tol * max(1.0, abs(a))
    return a == b


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--write", action="store_true")
    p.add_argument("--check", action="store_true")
    args = p.parse_args()
    values = compute()
    if args.write:
        FROZEN.write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
        return 0
    if args.check:
        frozen = json.loads(FROZEN.read_text())
        bad = [k for k in values if k not in frozen or not same(values[k], frozen[k])]
        bad += [k for k in frozen if k not in values]
        if bad:
            print("mismatch:", ", ".join(sorted(set(bad))))
            return 1
        print(f"{len(values)} frozen values reproduced")
        return 0
    json.dump(values, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
