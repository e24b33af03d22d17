"""Compare plain and AMG-preconditioned GMRES on transport with a small diffusive term."""

from nair import TransportSpec, gen_near_triangular, gmres, setup

prob = gen_near_triangular(TransportSpec(2, 128))
h = setup(prob.A)
for label, pre in (("none", None), ("nAIR V-cycle", h)):
    _, rep = gmres(prob.A, prob.b, precond=pre, restart=50, tol=1e-10, max_iters=100)
    rel = rep.residual_history[-1] / rep.residual_history[0]
    print("%-13s iterations %3d  converged %-5s  relative residual %.1e" % (label, rep.iterations, rep.converged, rel))
