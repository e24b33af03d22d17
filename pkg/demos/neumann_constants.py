"""Tabulate restriction and relaxation accuracy against the Neumann degree on each level."""

from nair import TransportSpec, gen_transport, setup
from nair.diagnostics import delta_constants
from nair.transfer import NeumannOptions, build_nair_restriction, transfer_from_blocks

h = setup(gen_transport(TransportSpec(2, 32)).A)
for lvl, L in enumerate(h.levels):
    if L.n > 2000:
        continue
    print("level %d  n=%d  n_f=%d" % (lvl, L.n, L.split.n_f))
    for k in range(4):
        Z, _, _ = build_nair_restriction(L.A_scaled, L.split, NeumannOptions(k, 0.0))
        tr = transfer_from_blocks(L.split, Z, L.transfer.W)
        rep = delta_constants(L.A_scaled, L.split, tr, k + 1, k=k)
        print("  k=%d  |delta_R|=%.3e  |delta_F|=%.3e" % (k, rep.delta_R_norm, rep.delta_F_norm))
