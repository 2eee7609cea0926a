"""Network data model, flux phases and the two four-terminal pump geometries.

Units: hbar = 1 and every energy or rate is measured in units of the common
relaxation rate ``gamma`` (so ``gamma == 1`` unless rescaled).

Tunneling convention: ``tunneling[j, k]`` is the amplitude for a pair to hop
from mode ``j`` to mode ``k``, i.e. the coefficient of ``a_k^dag a_j`` in the
Hamiltonian.  The matrix is hermitian with a zero diagonal; onsite energies
live in ``epsilon``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import jsonschema
import numpy as np

__all__ = [
    "NetworkModel",
    "FluxSpec",
    "PumpParams",
    "ValidationReport",
    "ModelError",
    "PUMP_LABELS",
    "flux_phase",
    "build_symmetric_pump",
    "build_asymmetric_pump",
    "build_pump",
    "validate",
    "load_model",
    "model_to_document",
]

PUMP_LABELS = ("L", "D", "R", "U")
_L, _D, _R, _U = range(4)

# junctions of the outer loop, plus the direct D-U junction of the symmetric pump
_OUTER_JUNCTIONS = ((_L, _D), (_D, _R), (_R, _U), (_U, _L))
_DU_JUNCTION = (_D, _U)


class ModelError(ValueError):
    """Raised for an invalid model or model document."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Josephson-junction network: onsite energies, tunneling, charging, baths."""

    epsilon: np.ndarray
    tunneling: np.ndarray
    capacitance: np.ndarray
    gamma_up: np.ndarray
    gamma: float = 1.0
    mode_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        eps = np.array(self.epsilon, dtype=float).reshape(-1)
        n = eps.size
        t = np.array(self.tunneling, dtype=complex)
        c = np.array(self.capacitance, dtype=float)
        gu = np.broadcast_to(np.asarray(self.gamma_up, dtype=float), (n,)).copy()
        if t.shape != (n, n) or c.shape != (n, n):
            raise ModelError(
                f"matrix shapes {t.shape}, {c.shape} do not match {n} modes"
            )
        object.__setattr__(self, "epsilon", _frozen(eps))
        object.__setattr__(self, "tunneling", _frozen(t))
        object.__setattr__(self, "capacitance", _frozen(c))
        object.__setattr__(self, "gamma_up", _frozen(gu))
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.mode_labels is not None:
            labels = tuple(str(s) for s in self.mode_labels)
            if len(labels) != n:
                raise ModelError(f"{len(labels)} labels for {n} modes")
            object.__setattr__(self, "mode_labels", labels)

    @property
    def n_modes(self) -> int:
        return self.epsilon.size

    @property
    def gamma_down(self) -> np.ndarray:
        """Annihilation rates, reconstructed as ``gamma + gamma_up``."""
        return self.gamma + self.gamma_up

    def index(self, label: str) -> int:
        if self.mode_labels is None or label not in self.mode_labels:
            raise KeyError(f"model has no mode labelled {label!r}")
        return self.mode_labels.index(label)

    def with_gamma_up(self, gamma_up) -> "NetworkModel":
        return NetworkModel(self.epsilon, self.tunneling, self.capacitance,
                            gamma_up, self.gamma, self.mode_labels)

    def __eq__(self, other):
        if not isinstance(other, NetworkModel):
            return NotImplemented
        return (
            self.mode_labels == other.mode_labels
            and self.gamma == other.gamma
            and np.array_equal(self.epsilon, other.epsilon)
            and np.array_equal(self.tunneling, other.tunneling)
            and np.array_equal(self.capacitance, other.capacitance)
            and np.array_equal(self.gamma_up, other.gamma_up)
        )

    __hash__ = None


@dataclass(frozen=True)
class FluxSpec:
    """Applied flux in units of the flux quantum."""

    flux_ratio: float = 0.0

    @property
    def delta_phi(self) -> float:
        return flux_phase(self.flux_ratio)


@dataclass(frozen=True)
class PumpParams:
    """Parameters of the four-terminal pump geometries.

    ``bias_split`` chooses how the bias is imposed on the creation rates:
    ``"left"`` raises the L rate by the full bias (default), ``"symmetric"``
    moves L up and R down by half the bias each.  In both cases the bias
    equals ``gamma_up[L] - gamma_up[R]``.
    """

    K: float
    E_C: float = 0.0
    gamma_up_base: float = 100.0
    bias: float = 0.0
    flux: FluxSpec = field(default_factory=FluxSpec)
    gamma: float = 1.0
    epsilon: float = 0.0
    bias_split: Literal["left", "symmetric"] = "left"

    def __post_init__(self):
        if isinstance(self.flux, (int, float)):
            object.__setattr__(self, "flux", FluxSpec(float(self.flux)))
        for name in ("K", "E_C", "gamma_up_base", "bias", "gamma", "epsilon"):
            if not math.isfinite(getattr(self, name)):
                raise ModelError(f"{name} must be finite")
        if self.K < 0:
            raise ModelError("K must be >= 0")
        if self.E_C < 0:
            raise ModelError("E_C must be >= 0")
        if self.gamma <= 0:
            raise ModelError("gamma must be > 0")
        if self.bias_split not in ("left", "symmetric"):
            raise ModelError(f"unknown bias_split {self.bias_split!r}")

    def creation_rates(self) -> np.ndarray:
        """Per-terminal creation rates in (L, D, R, U) order."""
        g = np.full(4, float(self.gamma_up_base))
        if self.bias_split == "left":
            g[_L] += self.bias
        else:
            g[_L] += 0.5 * self.bias
            g[_R] -= 0.5 * self.bias
        if np.any(g < 0):
            raise ModelError(
                f"bias {self.bias} drives a creation rate negative: {g.tolist()}"
            )
        return g

    def replace(self, **changes) -> "PumpParams":
        from dataclasses import replace

        if "flux_ratio" in changes:
            changes["flux"] = FluxSpec(float(changes.pop("flux_ratio")))
        return replace(self, **changes)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        return "valid" if self.ok else "; ".join(self.violations)


def flux_phase(flux_ratio: float) -> float:
    """Total phase accumulated around the outer loop, ``2*pi*flux_ratio``."""
    x = float(flux_ratio)
    if not math.isfinite(x):
        raise ModelError(f"flux ratio must be finite, got {flux_ratio!r}")
    return 2.0 * math.pi * x


def _set_hop(t: np.ndarray, dst: int, src: int, amplitude: complex) -> None:
    # amplitude multiplies a_dst^dag a_src, i.e. hopping src -> dst
    t[src, dst] = amplitude
    t[dst, src] = np.conj(amplitude)


def build_pump(params: PumpParams, direct_du: bool) -> NetworkModel:
    """Four-terminal loop L-D-R-U with equal quarter-flux phases on each edge.

    ``direct_du`` adds the D-U junction (phase ``delta_phi/2``) of the
    symmetric geometry.
    """
    dphi = params.flux.delta_phi
    quarter = params.K * np.exp(0.25j * dphi)
    t = np.zeros((4, 4), dtype=complex)
    c = np.zeros((4, 4))
    for a, b in _OUTER_JUNCTIONS:
        _set_hop(t, a, b, quarter)
        c[a, b] = c[b, a] = params.E_C
    if direct_du:
        a, b = _DU_JUNCTION
        _set_hop(t, a, b, params.K * np.exp(0.5j * dphi))
        c[a, b] = c[b, a] = params.E_C
    return NetworkModel(
        epsilon=np.full(4, params.epsilon),
        tunneling=t,
        capacitance=c,
        gamma_up=params.creation_rates(),
        gamma=params.gamma,
        mode_labels=PUMP_LABELS,
    )


def build_symmetric_pump(params: PumpParams) -> NetworkModel:
    return build_pump(params, direct_du=True)


def build_asymmetric_pump(params: PumpParams) -> NetworkModel:
    return build_pump(params, direct_du=False)


def validate(model: NetworkModel, atol: float = 0.0) -> ValidationReport:
    """Check the structural invariants of ``model``; never raises."""
    report = ValidationReport()
    v = report.violations
    t, c = model.tunneling, model.capacitance
    n = model.n_modes
    if n < 1:
        v.append("network has no modes")
    for j in range(n):
        if t[j, j] != 0:
            v.append(f"tunneling diagonal nonzero at ({j},{j})")
        if c[j, j] != 0:
            v.append(f"capacitance diagonal nonzero at ({j},{j})")
        for k in range(j + 1, n):
            if abs(t[k, j] - np.conj(t[j, k])) > atol:
                v.append(f"tunneling not hermitian at ({j},{k})")
            if abs(c[j, k] - c[k, j]) > atol:
                v.append(f"capacitance not symmetric at ({j},{k})")
    for j, k in zip(*np.nonzero(c < 0)):
        v.append(f"capacitance negative at ({j},{k})")
    if not np.all(np.isfinite(t)) or not np.all(np.isfinite(c)):
        v.append("non-finite matrix entry")
    if not np.all(np.isfinite(model.epsilon)):
        v.append("non-finite onsite energy")
    if not (model.gamma > 0 and math.isfinite(model.gamma)):
        v.append(f"gamma must be positive, got {model.gamma}")
    for j in np.nonzero(~(model.gamma_up >= 0))[0]:
        v.append(f"gamma_up negative at {j}")
    return report


_NUMBER = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}

MODEL_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["geometry", "gamma"],
    "properties": {
        "geometry": {"enum": ["symmetric", "asymmetric", "custom"]},
        "K": _NONNEG,
        "Ec": _NONNEG,
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "gamma_up": {
            "oneOf": [_NONNEG, {"type": "array", "items": _NONNEG, "minItems": 1}]
        },
        "bias": _NUMBER,
        "flux_ratio": _NUMBER,
        "bias_split": {"enum": ["left", "symmetric"]},
        "n_modes": {"type": "integer", "minimum": 1},
        "epsilon": {
            "oneOf": [_NUMBER, {"type": "array", "items": _NUMBER}]
        },
        "labels": {"type": "array", "items": {"type": "string"}},
        "tunneling": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["from", "to"],
                "properties": {
                    "from": {"type": "integer", "minimum": 0},
                    "to": {"type": "integer", "minimum": 0},
                    "re": _NUMBER,
                    "im": _NUMBER,
                },
            },
        },
        "capacitance": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["i", "j", "value"],
                "properties": {
                    "i": {"type": "integer", "minimum": 0},
                    "j": {"type": "integer", "minimum": 0},
                    "value": _NUMBER,
                },
            },
        },
    },
    "allOf": [
        {
            "if": {"properties": {"geometry": {"const": "custom"}}},
            "then": {
                "required": ["n_modes", "gamma_up"],
                "not": {"anyOf": [{"required": [k]} for k in
                                  ("K", "Ec", "bias", "flux_ratio", "bias_split")]},
            },
            "else": {
                "required": ["K", "Ec", "gamma_up", "bias", "flux_ratio"],
                "properties": {"epsilon": _NUMBER},
                "not": {"anyOf": [{"required": [k]} for k in
                                  ("n_modes", "tunneling", "capacitance", "labels")]},
            },
        }
    ],
}


def _schema_error(doc: dict) -> str | None:
    validator = jsonschema.Draft202012Validator(MODEL_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if not errors:
        return None
    err = errors[0]
    path = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{path}: {err.message}"


def load_model(document: dict | str | Path) -> NetworkModel:
    """Build a validated model from a JSON document (dict, JSON text or path)."""
    if isinstance(document, Path) or (
        isinstance(document, str) and not document.lstrip().startswith("{")
    ):
        document = json.loads(Path(document).read_text(encoding="utf-8"))
    elif isinstance(document, str):
        document = json.loads(document)
    msg = _schema_error(document)
    if msg is not None:
        raise ModelError(f"schema violation at {msg}")

    geometry = document["geometry"]
    gamma = float(document["gamma"])
    if geometry == "custom":
        model = _load_custom(document, gamma)
    else:
        gu = document["gamma_up"]
        params = PumpParams(
            K=document["K"],
            E_C=document["Ec"],
            gamma_up_base=0.0 if isinstance(gu, list) else gu,
            bias=document["bias"],
            flux=FluxSpec(document["flux_ratio"]),
            gamma=gamma,
            epsilon=document.get("epsilon", 0.0),
            bias_split=document.get("bias_split", "left"),
        )
        model = build_pump(params, direct_du=(geometry == "symmetric"))
        if isinstance(gu, list):
            if len(gu) != 4:
                raise ModelError("gamma_up: pump geometries need 4 baseline rates")
            shifted = model.gamma_up + np.asarray(gu, dtype=float)
            if np.any(shifted < 0):
                raise ModelError("gamma_up: bias drives a creation rate negative")
            model = model.with_gamma_up(shifted)
    report = validate(model)
    if not report.ok:
        raise ModelError(f"invalid model: {report}")
    return model


def _load_custom(doc: dict, gamma: float) -> NetworkModel:
    n = doc["n_modes"]
    eps = doc.get("epsilon", 0.0)
    eps = np.full(n, float(eps)) if not isinstance(eps, list) else np.asarray(eps, float)
    if eps.size != n:
        raise ModelError(f"epsilon: expected {n} entries, got {eps.size}")
    gu = doc["gamma_up"]
    gu = np.full(n, float(gu)) if not isinstance(gu, list) else np.asarray(gu, float)
    if gu.size != n:
        raise ModelError(f"gamma_up: expected {n} entries, got {gu.size}")

    t = np.zeros((n, n), dtype=complex)
    given = np.zeros((n, n), dtype=bool)
    for i, edge in enumerate(doc.get("tunneling", [])):
        j, k = edge["from"], edge["to"]
        if j >= n or k >= n or j == k:
            raise ModelError(f"tunneling/{i}: bad mode pair ({j},{k})")
        amp = complex(edge.get("re", 0.0), edge.get("im", 0.0))
        if given[k, j] and t[k, j] != np.conj(amp):
            raise ModelError(f"tunneling/{i}: conflicts with hermitian partner ({k},{j})")
        t[j, k] = amp
        t[k, j] = np.conj(amp)
        given[j, k] = True

    c = np.zeros((n, n))
    for i, entry in enumerate(doc.get("capacitance", [])):
        j, k = entry["i"], entry["j"]
        if j >= n or k >= n or j == k:
            raise ModelError(f"capacitance/{i}: bad mode pair ({j},{k})")
        c[j, k] = c[k, j] = entry["value"]

    labels = doc.get("labels")
    return NetworkModel(eps, t, c, gu, gamma, tuple(labels) if labels else None)


def model_to_document(model: NetworkModel) -> dict:
    """Explicit ("custom") JSON document describing ``model`` exactly."""
    n = model.n_modes
    doc: dict[str, Any] = {
        "geometry": "custom",
        "gamma": model.gamma,
        "n_modes": n,
        "epsilon": model.epsilon.tolist(),
        "gamma_up": model.gamma_up.tolist(),
        "tunneling": [
            {"from": j, "to": k, "re": float(model.tunneling[j, k].real),
             "im": float(model.tunneling[j, k].imag)}
            for j in range(n) for k in range(j + 1, n) if model.tunneling[j, k] != 0
        ],
        "capacitance": [
            {"i": j, "j": k, "value": float(model.capacitance[j, k])}
            for j in range(n) for k in range(j + 1, n) if model.capacitance[j, k] != 0
        ],
    }
    if model.mode_labels is not None:
        doc["labels"] = list(model.mode_labels)
    return doc

