"""Terminal currents and the pumped current.

Sign convention: ``I_j > 0`` means net flow of Cooper pairs from bath ``j``
into the network.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import MDMState
from .model import NetworkModel

__all__ = ["CurrentReport", "terminal_current", "terminal_currents", "pump_current", "current_report"]


@dataclass(frozen=True)
class CurrentReport:
    per_terminal: np.ndarray
    pump: float | None
    conservation_defect: float
    labels: tuple[str, ...] | None = None

    def as_dict(self) -> dict:
        names = self.labels or tuple(str(j) for j in range(len(self.per_terminal)))
        return {
            "per_terminal": {k: float(v) for k, v in zip(names, self.per_terminal)},
            "pump": None if self.pump is None else float(self.pump),
            "conservation_defect": float(self.conservation_defect),
        }


def _populations(state) -> np.ndarray:
    sigma = state.sigma if isinstance(state, MDMState) else np.asarray(state)
    return sigma.diagonal().real


def terminal_currents(model: NetworkModel, state) -> np.ndarray:
    return model.gamma_up - model.gamma * _populations(state)


def terminal_current(model: NetworkModel, state, j: int) -> float:
    """Current out of bath ``j``: ``-gamma n_j + gamma_up_j``."""
    if not 0 <= j < model.n_modes:
        raise IndexError(f"terminal {j} out of range for {model.n_modes} modes")
    return float(terminal_currents(model, state)[j])


def pump_current(model: NetworkModel, state) -> float:
    """``I_D - I_U = -gamma (n_D - n_U)``; needs modes labelled D and U."""
    try:
        d, u = model.index("D"), model.index("U")
    except KeyError as exc:
        raise KeyError(f"pump current needs modes labelled D and U: {exc}") from None
    n = _populations(state)
    return float(-model.gamma * (n[d] - n[u]))


def current_report(model: NetworkModel, state) -> CurrentReport:
    currents = terminal_currents(model, state)
    labels = model.mode_labels
    pump = pump_current(model, state) if labels and {"D", "U"} <= set(labels) else None
    return CurrentReport(currents, pump, float(np.sum(currents)), labels)
