"""Numerical tolerances shared by the engines and the test suite.

Keeping them in one place guarantees that a bound checked inside an engine
is the same bound the tests assert against.
"""

# Hermiticity / eigensolver
HERMITICITY_TOL = 1e-9        # max |M - M^dag| accepted as Hermitian input
EIGEN_MERGE_GAP = 1e-9        # eigenvalue gaps below this are treated as degenerate
RECONSTRUCT_TOL = 1e-10       # sum(lam_i P_i) must rebuild M this well

# Density matrices
TRACE_TOL = 1e-10             # |tr(rho) - 1|
PSD_FLOOR = -1e-10            # eigenvalues may dip this far below zero
STATE_NORM_TOL = 1e-10        # conditional-state norm after every step

# Channel structure
PAIRING_TOL = 1e-10           # residual of L_+ = L_-^dag exp(ds/2)
EIGENOP_TOL = 1e-8            # residual of [Phi, L] = dphi L and [H, Phi] = 0

# Engines
NORM_COLLAPSE = 1e-14         # renormalisation refuses divisors below this
ZERO_PROB = 1e-15             # final outcome probability treated as zero
POTENTIAL_FLOOR = 1e-14       # eigenvalue floor when taking log(pi)

# Oracle
STEADY_RESIDUAL = 1e-10       # |L(pi)|_max of a steady state
POSITIVITY_ABORT = -1e-8      # RK4 aborts when an eigenvalue falls below this

# Exact algebraic identities (entropy splits, first-law bookkeeping)
IDENTITY_TOL = 1e-10
