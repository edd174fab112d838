"""
Estimating the noise scale alongside the fit
============================================

The penalty is proportional to the noise scale, so an unknown scale
is a chicken-and-egg problem: the fit needs sigma, and the natural
sigma estimate (residual variance on the selected groups) needs a
fit.  The estimator alternates the two until the selected support
stops changing, and keeps a trace of every round.
"""
import numpy as np

from gslope import (GroupSpec, build_partition, estimate_sigma_gslope,
                    lambda_corrected_general, standardize)

rng = np.random.default_rng(3)
n, m, l = 200, 25, 3
sigma_true = 1.7

X = rng.standard_normal((n, m * l)) / np.sqrt(n)
design = standardize(X, build_partition(np.repeat(np.arange(m), l)))
lam = lambda_corrected_general(
    GroupSpec(q=0.1, ranks=design.ranks, weights=design.weights, n=n))

# .. plant four strong groups ..
beta = np.zeros(m * l)
for g in (2, 7, 11, 19):
    beta[design.partition.groups[g]] = 8.0
y = X @ beta + sigma_true * rng.standard_normal(n)

fit, trace = estimate_sigma_gslope(y, design, lam)

# .. each trace row pairs the support the scale was computed from
#    with the resulting estimate; round 0 starts from the empty
#    support, i.e. the raw variance of y ..
print("round  support                  sigma estimate")
for r, (support, sigma) in enumerate(trace.iterations):
    print("%4d   %-22s   %.4f" % (r, sorted(support), sigma))
print("converged: %r   true sigma: %.1f" % (trace.converged, sigma_true))

# .. the final fit is the one solved at the last estimate ..
print("selected groups:", [int(g) for g in fit.selected])
print("sigma used by the fit: %.4f" % fit.sigma_used)

# .. starting from the empty support the first estimate is biased
#    upward (all signal counts as noise); one refit later the strong
#    groups are in the support and the estimate drops to the truth ..
first, last = trace.iterations[0][1], trace.iterations[-1][1]
print("first estimate %.3f  ->  final %.3f" % (first, last))
