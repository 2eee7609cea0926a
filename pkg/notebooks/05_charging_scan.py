"""
Pumping versus charging energy
==============================

For each charging energy the pumped current is maximized over one flux
period at fixed bias.  The direct D-U junction lets the symmetric pump work
without charging; the asymmetric pump needs charging to pump at all.
"""
# %%
import numpy as np

from jjpump.sweep import scan_capacitance

ec = [0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0]
sym = scan_capacitance("symmetric", ec, [0.1], bias=1.0)
asym = scan_capacitance("asymmetric", ec, [0.1], bias=1.0)
print(" E_C     symmetric     asymmetric")
for i, e in enumerate(ec):
    print(f"{e:5.2f}   {sym.max_abs_pump[i, 0]:.4e}   {asym.max_abs_pump[i, 0]:.4e}")

# %%
ratio = sym.max_abs_pump[ec.index(0.1), 0] / asym.max_abs_pump[:, 0].max()
print(f"symmetric (E_C = 0.1) over asymmetric peak: {ratio:.1f}")
print("flux of the maximum:", np.unique(sym.argmax_flux), np.unique(asym.argmax_flux[1:]))
