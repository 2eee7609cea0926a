"""
Three routes to the steady state
================================

Fixed-point iteration, forward relaxation and (without charging) a direct
linear solve should all land on the same correlation matrix.  With charging
the fixed point is also checked from many random starts.
"""
# %%
import numpy as np

from jjpump import PumpParams, build_symmetric_pump, current_report
from jjpump.dynamics import relax_to_steady
from jjpump.steady import FixedPointConfig, fixed_point_iterate, multi_start, solve_linear_ec0

free = build_symmetric_pump(PumpParams(K=0.1, bias=1.0, flux=0.25))
a = fixed_point_iterate(free)
b = solve_linear_ec0(free)
c = relax_to_steady(free)
print("E_C = 0: fixed point vs linear", np.abs(a.state.sigma - b.state.sigma).max())
print("E_C = 0: relaxation vs linear ", np.abs(c.state.sigma - b.state.sigma).max())

# %%
charged = build_symmetric_pump(PumpParams(K=0.1, E_C=0.1, bias=1.0, flux=0.25))
fp = fixed_point_iterate(charged, FixedPointConfig(tol=1e-10))
print(f"fixed point: {fp.iterations} sweeps, residual {fp.residual:.1e}")
rep = multi_start(charged, n_starts=20, config=FixedPointConfig(tol=1e-10))
print(f"20 random starts: spread {rep.max_distance:.1e}, failures {rep.n_nonconverged}")

# %%
currents = current_report(charged, fp.state)
print(currents.as_dict())
