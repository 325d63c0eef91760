"""
Limits in s at both ends
========================

Extrapolate s F^s to its s -> 0 limit and (1 - s) F^s to its s -> 1 limit,
refining the grid together with s near 1.
"""

import math

from fracflow import Domain, builtin_family, lab, make_grid, sample

grid = make_grid(Domain(-1, 1), 512)
u = sample(builtin_family("bump", grid.domain), grid)

# order 0: s F^s -> |u|^2, with a Richardson fit through the sweep
r0 = lab.gamma_sweep_order0(u, [0.08, 0.04, 0.02, 0.01, 0.005])
print(r0.summary())

# order 1: the renormalized energy and its near / far parts
r1 = lab.gamma_sweep_order1(u, [0.2, 0.05, 0.01, 0.005])
print(r1.summary())

# in one dimension the small-s constant of the full double integral is 2
print(lab.ms_constant_estimate(u, [0.04, 0.02, 0.01, 0.005]).finding)

# s -> 1 on (0, 1): (1 - s) F^s(sin pi x) -> pi^2 / 4 with n ~ 16 / (1 - s)
f = builtin_family("sine_mode", Domain(0, 1), k=1)
rb = lab.gamma_sweep_bbm(f, Domain(0, 1), [0.6, 0.8, 0.9, 0.95, 0.99], n0=16,
                         target=math.pi ** 2 / 4)
print(rb.summary())
