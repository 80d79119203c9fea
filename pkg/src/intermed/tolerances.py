"""Default numerical tolerances.

All equality comparisons of utilities and profits use EPS_TOL unless the
caller overrides it; distribution matching uses the looser EPS_DISTR to
absorb grid-induced rounding, and EPS_DEV separates genuine deviation
profits from float noise.
"""

EPS_MASS = 1e-9   # population masses / distribution weights summing to 1
EPS_TOL = 1e-9    # utility and profit equality
EPS_DISTR = 1e-6  # sup-norm tolerance on normalized sold-good distributions
EPS_DEV = 1e-6    # minimum profit gain that counts as a profitable deviation
