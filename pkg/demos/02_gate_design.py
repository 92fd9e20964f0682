"""Design a conditional pi/2 rotation on a weakly coupled 13C.

For a nucleus with A_par = 650 Hz and A_perp = 11.45 kHz at 584 G, list the
(N, tau) designs at each resonance order k and compare the pulse count with
the small-angle estimate N ~ (pi/2) w_L / A_perp.
"""

import numpy as np

from sicmem import constants as const
from sicmem.ddgate import candidate_designs
from sicmem.hyperfine import ElectronModel, Nucleus

electron = ElectronModel.at_gauss(584)
nucleus = Nucleus(const.TWO_PI * 650, const.TWO_PI * 11.45e3)

print(" k     N   tau (us)   theta/pi   F")
for g in candidate_designs(nucleus, electron):
    print(f"{g.k:2d} {g.N:5d} {g.tau * 1e6:10.4f} {g.theta / np.pi:10.4f}   {g.fidelity:.5f}")
print(f"small-angle estimate N = {(np.pi / 2) * abs(nucleus.larmor(electron)) / nucleus.A_perp:.1f}")
