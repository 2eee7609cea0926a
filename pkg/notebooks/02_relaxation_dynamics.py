"""
Relaxation of the correlation matrix
====================================

The mean-field equations are integrated from the uncoupled fixed point of
the baths.  The populations drift to the biased steady state and the
coherences build up on the tunneling time scale.
"""
# %%
import numpy as np

from jjpump import PumpParams, build_symmetric_pump, evolve
from jjpump.dynamics import default_initial_state, write_trajectory_csv

model = build_symmetric_pump(PumpParams(K=0.1, E_C=0.1, bias=1.0, flux=0.25))
times = np.linspace(0, 20, 11)
traj = evolve(model, default_initial_state(model), 20.0, t_eval=times)

for s in traj:
    n = s.state.n
    print(f"t = {s.time:5.1f}  n - 100 = {np.round(n - 100, 6)}  |z_DU| = {abs(s.state.z(1, 3)):.3e}")

# %%
# the correlation matrix stays hermitian and positive along the way
print("smallest eigenvalue:", min(s.state.min_eigenvalue() for s in traj))

# %%
write_trajectory_csv(traj, "trajectory.csv", model.mode_labels)
print("wrote trajectory.csv")
