"""Central numerical policy.

Every validation in the package measures against one of these two absolute
tolerances. Construction-level checks (unit norms, Hermiticity, probability
ranges) use DEFAULT_ATOL; aggregate table checks (normalization, no-signaling
cross-checks) use the looser TABLE_ATOL because they accumulate more rounding.
"""

DEFAULT_ATOL = 1e-12

TABLE_ATOL = 1e-10
