"""
Choosing a penalty sequence
===========================

Four generators ship with the package.  The first two come from
per-group tail quantiles; the corrected pair additionally accounts for
how a random design inflates effect estimates as the support grows,
which is what keeps the group false discovery rate near its target
when many groups are truly active.
"""
import numpy as np

from gslope import (GroupSpec, lambda_corrected_equal,
                    lambda_corrected_general, lambda_max, lambda_mean)

m, rank, n = 40, 3, 130
spec = GroupSpec(q=0.1, ranks=np.full(m, rank),
                 weights=np.sqrt(np.full(m, float(rank))), n=n)

lam_max = lambda_max(spec)
lam_mean = lambda_mean(spec)
lam_ceq = lambda_corrected_equal(spec)
lam_cgen = lambda_corrected_general(spec)

# .. with equal ranks the mean rule coincides with the max rule ..
print("max  vs mean, largest difference: %.2e"
      % np.max(np.abs(lam_max - lam_mean)))

# .. the corrected sequences start from the same first entry and then
#    stay above the uncorrected tail; with n this small the correction
#    eventually explodes and the sequence is flattened from there on ..
print("first entries equal: %r" % bool(np.isclose(lam_ceq[0], lam_mean[0])))
rows = [0, 1, 2, 10, 20, 39]
print("  i    mean        corrected   flat?")
for i in rows:
    flat = "yes" if i and np.isclose(lam_ceq[i], lam_ceq[i - 1]) else ""
    print("%4d   %.6f    %.6f    %s" % (i, lam_mean[i], lam_ceq[i], flat))

# .. the general correction agrees with the equal-rank one whenever
#    ranks are homogeneous ..
print("equal vs general correction, largest difference: %.2e"
      % np.max(np.abs(lam_ceq - lam_cgen)))

# .. as n grows the corrections fade back into the uncorrected rule ..
big = GroupSpec(q=0.1, ranks=np.full(m, rank),
                weights=np.sqrt(np.full(m, float(rank))), n=10 ** 9)
print("n = 1e9, correction minus mean: %.2e"
      % np.max(np.abs(lambda_corrected_general(big) - lam_mean)))

# .. heterogeneous ranks split the two uncorrected rules apart: the
#    mean rule inverts the mixture tail instead of taking the worst
#    group, so it is never larger ..
mixed = GroupSpec(q=0.1, ranks=np.array([1, 2, 3, 5, 8]),
                  weights=np.sqrt([1.0, 2.0, 3.0, 5.0, 8.0]))
print("mixed ranks, mean <= max everywhere: %r"
      % bool(np.all(lambda_mean(mixed) <= lambda_max(mixed) + 1e-12)))
