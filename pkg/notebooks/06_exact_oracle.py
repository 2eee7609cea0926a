"""
Checking the closure against the full master equation
=====================================================

A two-mode network is small enough to integrate the master equation in a
truncated Fock space.  Without charging the two-point equations are closed,
so the only difference left is truncation; with charging the closure drops
four-point correlations and a real deviation appears.
"""
# %%
from jjpump.model import load_model
from jjpump.oracle import compare_meanfield


def network(Ec):
    return load_model({
        "geometry": "custom", "gamma": 1, "n_modes": 2, "gamma_up": [1.0, 0.25],
        "tunneling": [{"from": 0, "to": 1, "re": 0.5}],
        "capacitance": [{"i": 0, "j": 1, "value": Ec}] if Ec else [],
    })


for cutoff in (12, 16, 20, 24):
    rep = compare_meanfield(network(0.0), cutoff=cutoff)
    print(f"E_C = 0, cutoff {cutoff:2d}: max deviation {rep.max_dev:.2e}, "
          f"top-level population {rep.truncation_leak:.2e}")

# %%
for Ec in (0.01, 0.05, 0.2):
    rep = compare_meanfield(network(Ec), cutoff=20)
    print(f"E_C = {Ec}: max deviation {rep.max_dev:.2e}")
