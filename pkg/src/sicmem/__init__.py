"""Nuclear-spin quantum memories around divacancy spins in 4H-SiC.

Lattice and hyperfine generation, dynamical-decoupling gate design,
cluster-correlation coherence, memory census, register and
randomized-benchmarking simulations.
"""

__version__ = "0.1.0"
