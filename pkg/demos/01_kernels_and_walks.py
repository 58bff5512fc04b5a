"""Step kernels and their rescaled-walk analytics.

Walks through the two kernel families, the convergence of the rescaled jump
symbol to its stable limit, and the local-limit profile of the transition
probabilities.  Runs in a few seconds.
"""

import numpy as np

from stablelv import walks as wk
from stablelv.kernels import make_kernel


def main():
    for family, d, alpha in (("pareto", 1, 1.0), ("pareto", 1, 0.7)):
        kernel = make_kernel(family, d, alpha)
        print(f"== {kernel.kernel_id}  (sigma2 = {kernel.sigma2:.6f})")

        print(" symbol ladder  n (1 - psi(eta / n^(1/alpha))) at eta = 1:")
        for n in (1e2, 1e4, 1e6):
            val = float(kernel.da_limit(1.0, n))
            print(f"   n = {n:>8.0e}: {val:.6f}  (limit {kernel.sigma2:.6f})")

        print(" local-limit profile  sup |b(t) p_t(0,x) - p_1(x/b(t))|:")
        for t in (1e2, 1e3):
            xs, scaled, dens, cert = wk.llt_profile(kernel, t)
            err = float(np.max(np.abs(scaled - dens)))
            print(f"   t = {t:>6.0f}: sup error {err:.2e}  (certificate {cert:.1e})")
        print()

    kernel = make_kernel("pareto", 1, 1.0)
    table = wk.potential_kernel(kernel, window=8)
    print("potential kernel a(x) for the critical kernel, |x| <= 8:")
    print("  ", " ".join(f"{table.a(x):.4f}" for x in range(9)))
    print("  closed form:", " ".join(f"{wk.potential_pareto1(x):.4f}" for x in range(9)))


if __name__ == "__main__":
    main()
