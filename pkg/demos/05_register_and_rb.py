"""Noisy register operations and single-qubit randomized benchmarking.

The gate and dephasing error rates are calibrated so that two rounds of
algorithmic cooling reach 0.93 nuclear initialisation and the electron-nuclear
Bell state reaches 0.81. The Bell state is then reconstructed by simulated
tomography. Finally a depolarizing Clifford channel is benchmarked.
"""

from sicmem import rbench, register

noise = register.calibrate_noise(0.93, 0.81, 2)
cooled = register.cooled_state(noise, 2)
bell = register.entangle_bell(cooled, noise)
pair = register.reduce_to_pair(bell)
recon = register.qst(pair, shots=5000, seed=1, psd=True)
print(f"p_gate = {noise.p_gate:.4f}, p_dephase = {noise.p_dephase:.4f}")
print(f"nuclear init fidelity {register.nuclear_init_fidelity(cooled):.3f}, "
      f"Bell fidelity {register.bell_fidelity(bell):.3f}, concurrence {register.concurrence(pair):.3f}")
print(f"tomography vs true state: {register.state_fidelity(recon, pair):.4f}")

seqs = rbench.sample_sequences([1, 100, 300, 1000, 2200, 3000], 30, seed=5)
res = rbench.fit_rb(rbench.simulate_rb(seqs, 3.2e-4, shots=2000, seed=6), n_boot=200, seed=7)
print(f"RB: F_avg = {res.fidelity:.6f}, 95% CI ({res.ci[0]:.6f}, {res.ci[1]:.6f})")
