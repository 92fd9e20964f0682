"""Electron-detected NMR of one bath configuration.

A CPMG train of N pulses with spacing 2*tau flips the electron coherence
wherever tau matches a nuclear resonance. We sample a purified and a
natural-abundance bath around the same defect and print the deepest dips.
"""

import numpy as np

from sicmem import ddgate
from sicmem.hyperfine import ElectronModel, attach_hyperfine
from sicmem.lattice import CrystalModel, IsotopeModel, enumerate_sites, sample_bath

electron = ElectronModel.at_gauss(500)
sites = enumerate_sites(CrystalModel(), 4.0)
tau = np.linspace(1e-6, 12e-6, 1500)

for name, iso in (("purified", IsotopeModel(0.0015, 0.0002)), ("natural", IsotopeModel(0.047, 0.011))):
    bath = attach_hyperfine(sample_bath(sites, iso, seed=3))
    spec = ddgate.bath_spectrum(bath, tau, 32, electron)
    order = np.argsort(spec.M)[:5]
    print(f"{name}: {len(bath)} spins, {spec.count_dips(0.5)} dips below M = 0.5")
    for i in sorted(order):
        print(f"   tau = {tau[i] * 1e6:7.3f} us   M = {spec.M[i]:+.3f}")
