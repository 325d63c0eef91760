"""
Flows converge with the energies
================================

Along s -> 0 the fractional flows approach the limit flows; along s -> 1
the scaled flows approach a heat flow.
"""

from fracflow import Domain, lab

bump = {"family": "bump"}
s_list = [0.2, 0.1, 0.05, 0.02]

# s F^s flows -> u' = -2 u
r = lab.flow_stability("ZeroOrder", "LimitODE", s_list, 1e-3, 1.0, bump, Domain(-1, 1), n=64)
print(r.summary())

# renormalized flows -> the s = 0 renormalized flow; the trajectory gaps shrink,
# but the signed energy gap at T/2 crosses zero between s = 0.2 and s = 0.1, so
# its absolute value is not monotone and that check reports False
r = lab.flow_stability("Renormalized", "LimitZero", s_list, 1e-2, 1.0, bump, Domain(-1, 1), n=64)
print(r.summary())

# (1 - s) F^s flows -> the heat flow, with the grid refined as s -> 1
r = lab.flow_stability("BBM", "LimitHeat", [0.6, 0.8, 0.9, 0.95], 1e-3, 0.5,
                       {"family": "sine_mode", "params": {"k": 1}}, Domain(0, 1), n0=16)
print(r.summary())
