"""How many usable nuclear memories does a defect have, versus isotope content?

Builds the census model once (site geometry and gate designs) and then sweeps
an equal 29Si/13C concentration. Low-hyperfine memories (|A_par| < 60 kHz)
peak at an intermediate concentration: too few spins at low c, too much
crosstalk at high c.
"""

import numpy as np

from sicmem import constants as const
from sicmem.hyperfine import ElectronModel
from sicmem.lattice import CrystalModel, IsotopeModel
from sicmem.memcensus import CensusModel, MemoryCriteria

crystal, electron = CrystalModel(), ElectronModel.at_gauss(500)
model = CensusModel(crystal, electron, 4.0, np.pi / 2, 8, T_limit=2e-3)
low_a = MemoryCriteria(0.9, 1.5e-3, np.pi / 2, 8, (0.0, const.TWO_PI * 60e3))

print("     c      N_mem(all)  N_mem(|A_par| < 60 kHz)")
for c in np.logspace(-4, np.log10(5e-2), 9):
    iso = IsotopeModel(c, c)
    everything = model.census(iso, MemoryCriteria(0.9, 1.5e-3, np.pi / 2, 8))
    print(f"{c:9.2e} {everything.N_mem:10.3f} {model.census(iso, low_a).N_mem:12.3f}")
natural = model.census(IsotopeModel(0.047, 0.011), low_a)
print(f"natural abundance: {natural.N_mem:.3f} low-hyperfine memories")
