"""
Building the two pump geometries
================================

Four superconducting terminals L, D, R, U sit on a loop threaded by a flux.
The symmetric pump also has a direct D-U junction.  Each junction carries a
share of the flux phase, so only the total phase around the loop matters.
"""
# %%
import numpy as np

from jjpump import PumpParams, build_asymmetric_pump, build_symmetric_pump, validate
from jjpump.model import model_to_document

params = PumpParams(K=0.1, E_C=0.1, gamma_up_base=100.0, bias=1.0, flux=0.25)
sym = build_symmetric_pump(params)
asym = build_asymmetric_pump(params)
print("labels:", sym.mode_labels)
print("creation rates (bias on L):", sym.gamma_up)

# %%
# tunneling[j, k] is the amplitude for a pair to hop j -> k
np.set_printoptions(precision=4, suppress=True)
print("symmetric pump tunneling matrix:\n", sym.tunneling)
print("asymmetric pump has no D-U junction:", asym.tunneling[1, 3] == 0)

# %%
# the phase collected around the outer loop equals 2 pi Phi/Phi0 (up to orientation)
t = sym.tunneling
loop = t[0, 1] * t[1, 2] * t[2, 3] * t[3, 0]
print("loop phase / 2pi =", -np.angle(loop) / (2 * np.pi))

# %%
# models validate and serialize to a JSON document that reloads exactly
print("valid:", validate(sym).ok)
doc = model_to_document(sym)
print(sorted(doc))
