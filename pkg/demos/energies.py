"""
Fractional energies of a bump
=============================

Assemble the s-fractional energy of a smooth bump on (-1, 1), split it into
near and far parts and watch the renormalized energy settle as s shrinks.
"""

import numpy as np

from fracflow import Domain, assemble_far, assemble_gagliardo, assemble_hat0
from fracflow import assemble_mass, assemble_near, builtin_family, make_grid, sample

# a hat basis with 256 interior nodes and the bump sampled at the nodes
grid = make_grid(Domain(-1, 1), 256)
u = sample(builtin_family("bump", grid.domain), grid)

F0 = assemble_mass(grid, "consistent").form(u)
print(f"F0 = |u|^2 = {F0:.6f}")

# F^s blows up like F0 / s, while G + J = F^s - F0 / s stays bounded
for s in (0.4, 0.2, 0.1, 0.05, 0.01):
    Fs = assemble_gagliardo(grid, s).form(u)
    G = assemble_near(grid, s).form(u)
    J = assemble_far(grid, s).form(u)
    print(f"s={s:<5} F^s={Fs:10.4f}  s*F^s={s * Fs:.5f}  G={G:.5f}  J={J:+.5f}  "
          f"F^s - F0/s={Fs - F0 / s:.5f}")

# the s = 0 limit of the renormalized energy
print(f"Fhat0 = {assemble_hat0(grid).form(u):.5f}")

# the far part is tiny but sign-indefinite: a random vector shows it
v = np.random.default_rng(0).normal(size=grid.n)
print(f"J on random data at s=0.25: {assemble_far(grid, 0.25).form(v):+.4f}")
