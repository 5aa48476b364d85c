"""dualkit: convex optimization solvers linked by primal-dual equivalences.

Four algorithm families (subspace correction, alternating projection,
operator splitting, multiplier methods) plus a verification harness that
certifies, numerically, that designated primal and dual runs generate
iterates satisfying the first-order pairing relations.
"""

__version__ = "0.1.0"
