"""Show that the multilevel error propagator of a triangular system is nilpotent."""

from nair import TransportSpec, gen_chain, gen_transport, setup, solve
from nair.diagnostics import nilpotency_check

for name, prob in (("chain n=200", gen_chain(200)), ("transport 16x16", gen_transport(TransportSpec(2, 16)))):
    h = setup(prob.A, max_coarse=10)
    rep = nilpotency_check(prob.A, h)
    _, sol = solve(h, prob.b, tol=1e-14, max_iters=prob.n)
    print("%-16s levels %d  max on/above diagonal %.1e  |E^n| %.1e  iterations to 1e-14: %d"
          % (name, h.num_levels, rep.max_upper, rep.E_power_norm, sol.iterations))
