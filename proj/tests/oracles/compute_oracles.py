#!/usr/bin/env python3
"""Independent high-precision reference values frozen into the C++ unit tests.

Run with `python3 tests/oracles/compute_oracles.py`. Nothing here shares code
with the C++ implementation; every value is re-derived from the defining
formula with mpmath at 50 significant digits.
"""
import mpmath as mp

mp.mp.dps = 50


def linear_alpha_bar(T, b0, b1):
    prod = mp.mpf(1)
    for i in range(1, T + 1):
        beta = mp.mpf(b0) if T == 1 else mp.mpf(b0) + (mp.mpf(b1) - mp.mpf(b0)) * (i - 1) / (T - 1)
        prod *= 1 - beta
    return prod


def cosine_f(u, s):
    return mp.cos((u + s) / (1 + s) * mp.pi / 2) ** 2


def sigma_grid(N, smin, smax, rho):
    smin, smax, rho = mp.mpf(smin), mp.mpf(smax), mp.mpf(rho)
    return [(smax ** (1 / rho) + mp.mpf(i) / N * (smin ** (1 / rho) - smax ** (1 / rho))) ** rho for i in range(N)] + [0]


def mixture_logpdf(x, abar, w, m, v):
    tot = 0
    for wi, mi, vi in zip(w, m, v):
        s2 = abar * vi + 1 - abar
        tot += wi * mp.npdf(x, mp.sqrt(abar) * mi, mp.sqrt(s2))
    return mp.log(tot)


def posterior_mean_quadrature(x, abar, w, m, v):
    # E[x0 | x_t = x] = int x0 p(x0) N(x; sqrt(abar) x0, 1-abar) dx0 / int p(x0) N(...) dx0
    def prior(x0):
        return sum(wi * mp.npdf(x0, mi, mp.sqrt(vi)) for wi, mi, vi in zip(w, m, v))

    def lik(x0):
        return mp.npdf(x, mp.sqrt(abar) * x0, mp.sqrt(1 - abar))

    num = mp.quad(lambda x0: x0 * prior(x0) * lik(x0), [-mp.inf, -2, 0, 2, mp.inf])
    den = mp.quad(lambda x0: prior(x0) * lik(x0), [-mp.inf, -2, 0, 2, mp.inf])
    return num / den


def euler_standard_normal(grid, x0):
    x = mp.mpf(x0)
    for i in range(len(grid) - 1):
        s = grid[i]
        v = x * s / (1 + s * s)
        x = x + (grid[i + 1] - s) * v
    return x


def ddpm_chain_variance(T, b0, b1):
    # Standard-normal data with the exact posterior-mean plug-in: every
    # ancestral step is linear in x_t, so the output variance is a recursion.
    ab = [mp.mpf(1)]
    for i in range(1, T + 1):
        beta = mp.mpf(b0) + (mp.mpf(b1) - mp.mpf(b0)) * (i - 1) / (T - 1)
        ab.append(ab[-1] * (1 - beta))
    v = mp.mpf(1)
    for t in range(T, 0, -1):
        a, p = ab[t], ab[t - 1]
        r = a / p
        gain = mp.sqrt(r) * (1 - p) / (1 - a) + mp.sqrt(p) * (1 - r) / (1 - a) * mp.sqrt(a)
        v = gain * gain * v + (1 - r) * (1 - p) / (1 - a)
    return v


def main():
    print("linear T=1000 (1e-4,0.02) alpha_bar[1000] =", mp.nstr(linear_alpha_bar(1000, "1e-4", "0.02"), 20))
    print("scaled linear T=50 (0.002,0.4) alpha_bar[50] =", mp.nstr(linear_alpha_bar(50, "0.002", "0.4"), 20))
    s = mp.mpf("0.008")
    print("cosine T=10 s=0.008 alpha_bar[5] =", mp.nstr(cosine_f(mp.mpf(5) / 10, s) / cosine_f(0, s), 20))
    print("sigma grid N=4 (0.002,80,7) =", [mp.nstr(g, 20) for g in sigma_grid(4, "0.002", 80, 7)])

    w, m, v = [mp.mpf("0.5")] * 2, [mp.mpf(-2), mp.mpf(2)], [mp.mpf(1)] * 2
    x, abar = mp.mpf("0.3"), mp.mpf("0.25")
    score = mp.diff(lambda y: mixture_logpdf(y, abar, w, m, v), x)
    print("two-comp eps*(0.3, abar=.25) =", mp.nstr(-mp.sqrt(1 - abar) * score, 20))
    print("two-comp x0hat(0.3, abar=.25) =", mp.nstr(posterior_mean_quadrature(x, abar, w, m, v), 20))

    print("velocity std-normal x=1 sigma=100 =", mp.nstr(mp.mpf(100) / 10001, 20))
    print("ddim example out =", mp.nstr(mp.mpf("0.9") * (1 - mp.sqrt(mp.mpf("0.75")) * mp.mpf("0.5")) / mp.mpf("0.5") + mp.sqrt(mp.mpf("0.19")) * mp.mpf("0.5"), 20))
    kappa = mp.sqrt(mp.mpf("0.19")) / mp.sqrt(mp.mpf("0.75"))
    print("ddim kappa, lambda =", mp.nstr(kappa, 20), mp.nstr(mp.mpf("0.9") - kappa * mp.mpf("0.5"), 20))
    print("ddpm skip mean, var, sample(z=1) =", mp.nstr(mp.sqrt(2), 20), mp.nstr(mp.mpf(1) / 3, 20),
          mp.nstr(mp.sqrt(2) + mp.sqrt(mp.mpf(1) / 3), 20))

    print("ddpm chain output variance T=50 (0.002,0.4) =", mp.nstr(ddpm_chain_variance(50, "0.002", "0.4"), 20))

    # Euler on standard-normal data: error of the first-order scheme vs. x(0) = x(smax)/sqrt(1+smax^2).
    for params in [(0.002, 80, 7), (0.002, 10, 1), (1e-3, 10, 1), (0.002, 10, 7), (0.002, 5, 3)]:
        errs = []
        for N in (16, 32, 64):
            g = sigma_grid(N, *params)
            xi = mp.mpf(1) * params[1]
            exact = xi / mp.sqrt(1 + mp.mpf(params[1]) ** 2)
            errs.append(abs(euler_standard_normal(g, xi) - exact))
        print("euler", params, "errors", [mp.nstr(e, 6) for e in errs], "ratios",
              mp.nstr(errs[0] / errs[1], 6), mp.nstr(errs[1] / errs[2], 6))


if __name__ == "__main__":
    main()
