"""Solve 2D upwind transport with an nAIR V-cycle and print the convergence report."""

import sys

from nair import TransportSpec, gen_transport, setup, solve

m = int(sys.argv[1]) if len(sys.argv) > 1 else 128
prob = gen_transport(TransportSpec(dim=2, cells_per_axis=m))
h = setup(prob.A, neumann_degree=2)
print(h.summary())
x, rep = solve(h, prob.b)
print("iterations %d  rho %.3g  OC %.2f  CC %.2f  WPD %.2f" % (rep.iterations, rep.rho, rep.OC, rep.CC, rep.WPD))
print("max error vs exact solution %.2e" % abs(x - prob.x_exact).max())
