"""Published reference grids used to cross-check the analytic tables.

Values are recorded as printed; the CLI reports where a computed cell differs
instead of patching the computation.
"""

from __future__ import annotations

# (a, k) -> (n, minimum d or None for "--"), at p = 0.999999
MIN_DEGREE = {
    (0.5, 50): (159, 59), (0.5, 20): (81, 24), (0.5, 5): (36, 7),
    (0.75, 50): (95, 61), (0.75, 20): (47, 25), (0.75, 5): (20, 7),
    (0.9, 50): (71, 65), (0.9, 20): (34, 27), (0.9, 5): (13, 8),
    (0.92, 50): (69, 64), (0.92, 20): (32, 26), (0.92, 5): (12, 7),
    (0.95, 50): (64, None), (0.95, 20): (29, 27), (0.95, 5): (11, 8),
    (0.97, 50): (61, None), (0.97, 20): (27, None), (0.97, 5): (10, 9),
    (0.99, 50): (57, None), (0.99, 20): (25, None), (0.99, 5): (8, None),
}
MIN_DEGREE_AVAILABILITIES = (0.5, 0.75, 0.9, 0.92, 0.95, 0.97, 0.99)
MIN_DEGREE_KS = (50, 20, 5)

# Recommended retrieve degree per availability.
RECOMMENDED_K = {0.5: 50, 0.75: 20, 0.99: 5}

# (row, a) -> storage savings in percent, at p = 0.999999 with RECOMMENDED_K.
# row is one of "msr", "mbr_d_k", "mbr_d_n1".
SAVINGS_PERCENT = {
    ("msr", 0.5): 47, ("msr", 0.75): 77, ("msr", 0.99): 84,
    ("mbr_d_k", 0.5): 69, ("mbr_d_k", 0.75): 55, ("mbr_d_k", 0.99): 11,
    ("mbr_d_n1", 0.5): 81, ("mbr_d_n1", 0.75): 70, ("mbr_d_n1", 0.99): 25,
}

# (a, p_low) -> replica count
REPLICAS = {
    (0.5, 0.99): 7, (0.5, 0.98): 6, (0.5, 0.95): 5,
    (0.75, 0.99): 4, (0.75, 0.98): 3, (0.75, 0.95): 3,
    (0.99, 0.99): 1, (0.99, 0.98): 1, (0.99, 0.95): 1,
}
REPLICA_AVAILABILITIES = (0.5, 0.75, 0.99)
REPLICA_TARGETS = (0.99, 0.98, 0.95)
