"""
The sorted-l1 norm and its proximal operator
============================================

The penalty behind everything else in this package pairs the largest
magnitude with the largest weight, the second largest with the second
weight, and so on.  This script pokes at the three primitives: the
norm, its prox, and the dual norm that certifies optimality.
"""
import numpy as np

from gslope import sorted_l1_dual_norm, prox_sorted_l1, sorted_l1_norm

lam = np.array([3.0, 1.0])

# .. the norm sorts magnitudes before weighting: both vectors below
#    contain the same entries, so they pay the same penalty ..
print("J(1, -2) =", sorted_l1_norm(lam, np.array([1.0, -2.0])))
print("J(-2, 1) =", sorted_l1_norm(lam, np.array([-2.0, 1.0])))

# .. the prox shrinks toward zero, but unlike the plain soft
#    threshold it can also *cluster*: (4, 3) lands on a tie because
#    shrinking the larger entry by 3 and the smaller by 1 would
#    reverse their order, which the penalty never rewards ..
print("prox(4, 3)  =", prox_sorted_l1(np.array([4.0, 3.0]), lam))

# .. entries below the shifted threshold vanish entirely ..
print("prox(1, 3)  =", prox_sorted_l1(np.array([1.0, 3.0]), lam))

# .. signs survive, magnitudes never grow ..
y = np.array([-4.0, 3.0])
print("prox(-4, 3) =", prox_sorted_l1(y, lam))

# .. the dual norm is the scale factor needed to pull a point onto
#    the unit ball of the penalty's polar; values <= 1 mean the point
#    is a valid dual certificate ..
print("dual norm of (3, 0) under lam=(2,1):",
      sorted_l1_dual_norm(np.array([2.0, 1.0]), np.array([3.0, 0.0])))
print("dual norm of (2, 1) under lam=(2,1):",
      sorted_l1_dual_norm(np.array([2.0, 1.0]), np.array([2.0, 1.0])))

# .. a quick check that the prox is really the argmin: random
#    perturbations around the output never improve the objective ..
rng = np.random.default_rng(0)
y = rng.normal(size=6, scale=3.0)
lam = np.sort(rng.uniform(0.5, 2.0, size=6))[::-1]
b = prox_sorted_l1(y, lam)


def objective(v):
    return 0.5 * np.sum((v - y) ** 2) + sorted_l1_norm(lam, v)


best = min(objective(b + 1e-4 * rng.normal(size=6)) for _ in range(2000))
print("objective at prox output: %.6f" % objective(b))
print("best perturbed objective: %.6f (never smaller)" % best)
