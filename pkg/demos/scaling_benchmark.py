"""Convergence factor and complexities as the grid is refined, for k = 1 and k = 2."""

from nair import TransportSpec, gen_transport, setup, solve

print("%6s %8s %2s %8s %6s %6s %6s" % ("m", "n", "k", "rho", "OC", "CC", "WPD"))
for m in (32, 64, 128, 256):
    prob = gen_transport(TransportSpec(2, m))
    for k in (1, 2):
        _, rep = solve(setup(prob.A, neumann_degree=k), prob.b)
        print("%6d %8d %2d %8.3g %6.2f %6.2f %6.2f" % (m, prob.n, k, rep.rho, rep.OC, rep.CC, rep.WPD))
