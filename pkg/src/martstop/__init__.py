"""Stopped-martingale expectations with possibly infinite stopping times.

Exact lattice dynamic programming and seeded Monte Carlo for
``L_n = E[M_T 1(T <= n)]`` and ``R_n = E[M_n 1(T > n)]``, plus a harness of
finite-horizon checks built on them.
"""

__version__ = "0.1.0"
