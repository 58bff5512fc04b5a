"""Voter-model survival from a single occupied site.

For the transient heavy-tail kernel the survival probability decays like
1/(gamma_e t); for the critical kernel it decays like log t / (pi sigma^2 t).
Both scaled ladders are printed next to their limit constants.  Runs in
about half a minute.
"""

import math

from stablelv import coalescing as co
from stablelv import dynamics as dy
from stablelv.kernels import make_kernel


def main():
    nrep = 20_000

    kernel = make_kernel("pareto", 1, 0.7)
    ge = co.gamma_e_oracle(kernel)
    print(f"== {kernel.kernel_id} (transient), escape probability {ge:.4f}")
    res = dy.survival_probability(kernel, 1.0, [30.0, 100.0, 300.0], nrep, seed=1)
    for t, e in zip(res.times, res.p_t):
        print(
            f"   t = {t:>5.0f}: p_t = {e.value:.5f} +- {e.se:.5f}"
            f"   gamma_e * t * p_t = {ge * t * e.value:.3f}  (limit 1)"
        )

    kernel = make_kernel("pareto", 1, 1.0)
    target = 1.0 / (math.pi * kernel.sigma2)
    print(f"== {kernel.kernel_id} (critical), limit constant {target:.4f}")
    res = dy.survival_probability(kernel, 1.0, [30.0, 100.0, 300.0], nrep, seed=2)
    for t, e in zip(res.times, res.p_t):
        print(
            f"   t = {t:>5.0f}: p_t = {e.value:.5f} +- {e.se:.5f}"
            f"   t p_t / log t = {t * e.value / math.log(t):.4f}"
        )


if __name__ == "__main__":
    main()
