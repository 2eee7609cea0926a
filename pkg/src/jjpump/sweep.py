"""Flux x bias sweeps, charging scans, CSV output and SVG heatmaps."""
from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from xml.etree import ElementTree as ET

import numpy as np

from . import __version__
from .dynamics import MDMState, relax_to_steady
from .model import FluxSpec, PumpParams, build_pump, model_to_document
from .observables import current_report
from .steady import METHODS, FixedPointConfig, fixed_point_iterate, solve_steady

__all__ = [
    "CSV_COLUMNS",
    "Axis",
    "SweepSpec",
    "SweepRecord",
    "SweepResult",
    "ScanResult",
    "run_sweep",
    "scan_capacitance",
    "write_csv",
    "read_csv",
    "write_scan_csv",
    "render_heatmap_svg",
    "symmetry_report",
    "resolve_threads",
]

CSV_COLUMNS = (
    "flux_ratio", "bias", "I_pump", "I_L", "I_D", "I_R", "I_U",
    "n_L", "n_D", "n_R", "n_U", "converged", "iterations", "method",
)
GEOMETRIES = ("symmetric", "asymmetric")


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else ``$JJPUMP_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("JJPUMP_THREADS", "").strip()
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


@dataclass(frozen=True)
class Axis:
    min: float
    max: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("axis count must be >= 1")
        if self.count > 1 and not self.max > self.min:
            raise ValueError("axis max must exceed min")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.min)])
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class SweepSpec:
    geometry: str
    params: PumpParams
    flux: Axis = Axis(-1.0, 1.0, 101)
    bias: Axis = Axis(-5.0, 5.0, 101)
    method: str = "fixed_point"
    config: FixedPointConfig = FixedPointConfig()
    seed: int | None = None
    warm_start: bool = False

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.method == "linear_ec0" and self.params.E_C != 0:
            raise ValueError("linear_ec0 needs E_C = 0")
        # every bias on the grid must leave the creation rates non-negative
        for b in (self.bias.min, self.bias.max):
            self.params.replace(bias=float(b)).creation_rates()

    def point_params(self, flux_ratio: float, bias: float) -> PumpParams:
        return self.params.replace(flux=FluxSpec(float(flux_ratio)), bias=float(bias))

    def provenance(self) -> dict:
        p = asdict(self.params)
        return {
            "geometry": self.geometry,
            "params": p,
            "flux_axis": asdict(self.flux),
            "bias_axis": asdict(self.bias),
            "method": self.method,
            "solver": asdict(self.config),
            "seed": self.seed,
            "warm_start": self.warm_start,
        }

    def spec_hash(self) -> str:
        blob = json.dumps(self.provenance(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SweepRecord:
    flux_ratio: float
    bias: float
    I_pump: float
    I_L: float
    I_D: float
    I_R: float
    I_U: float
    n_L: float
    n_D: float
    n_R: float
    n_U: float
    converged: bool
    iterations: int
    method: str
    conservation_defect: float = field(default=0.0, compare=False)


@dataclass
class SweepResult:
    spec: SweepSpec | None
    flux_values: np.ndarray
    bias_values: np.ndarray
    records: list[SweepRecord]
    header: dict = field(default_factory=dict)

    def grid(self, quantity: str) -> np.ndarray:
        """Values of ``quantity`` on a (flux, bias) array."""
        vals = np.array([getattr(r, quantity) for r in self.records])
        return vals.reshape(self.flux_values.size, self.bias_values.size)

    def converged_grid(self) -> np.ndarray:
        return self.grid("converged").astype(bool)


def _model_hash(geometry: str, params: PumpParams) -> str:
    doc = model_to_document(build_pump(params, geometry == "symmetric"))
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def _solve_point(geometry, params, method, config, initial=None):
    model = build_pump(params, direct_du=(geometry == "symmetric"))
    if initial is not None and method == "fixed_point":
        result = fixed_point_iterate(model, config, initial=MDMState(initial))
        if not result.converged:
            fallback = relax_to_steady(model, initial=MDMState(initial), tol=config.tol)
            fallback.iterations += result.iterations
            result = fallback
    else:
        result = solve_steady(model, method, config)
    rep = current_report(model, result.state)
    I = rep.per_terminal
    n = result.state.n
    rec = SweepRecord(
        float(params.flux.flux_ratio), float(params.bias), float(rep.pump),
        *map(float, I), *map(float, n),
        bool(result.converged), int(result.iterations), result.method,
        float(rep.conservation_defect),
    )
    return rec, result.state.sigma


def _run_row(task):
    geometry, params_list, method, config_list, warm = task
    out = []
    sigma = None
    for params, config in zip(params_list, config_list):
        rec, s = _solve_point(geometry, params, method, config, sigma if warm else None)
        if rec.converged:
            sigma = s
        out.append(rec)
    return out


def _point_config(spec: SweepSpec, index: int) -> FixedPointConfig:
    if spec.seed is None:
        return spec.config
    return replace(spec.config, seed=spec.seed + index)


def run_sweep(spec: SweepSpec, threads: int | None = None) -> SweepResult:
    """Solve the steady state on every (flux, bias) grid point.

    Points are ordered flux-major.  Each row of fixed flux is one task; the
    rows may run in parallel worker processes and are written back by index,
    so the result does not depend on scheduling.
    """
    flux = spec.flux.values()
    bias = spec.bias.values()
    nb = bias.size
    tasks = []
    for i, f in enumerate(flux):
        params = [spec.point_params(f, b) for b in bias]
        configs = [_point_config(spec, i * nb + j) for j in range(nb)]
        tasks.append((spec.geometry, params, spec.method, configs, spec.warm_start))
    workers = min(resolve_threads(threads), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_row, tasks))
    else:
        rows = [_run_row(t) for t in tasks]
    records = [r for row in rows for r in row]
    header = {
        "jjpump_version": __version__,
        "spec_hash": spec.spec_hash(),
        "model_hash": _model_hash(spec.geometry, spec.params),
        "seed": spec.seed,
        "spec": spec.provenance(),
    }
    return SweepResult(spec, flux, bias, records, header)


def _fmt(x) -> str:
    if isinstance(x, bool) or isinstance(x, np.bool_):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_csv(result: SweepResult, path, extra_header: dict | None = None) -> None:
    """Write the sweep with a ``#``-prefixed provenance block and fixed formatting."""
    path = Path(path)
    header = dict(result.header)
    if extra_header:
        header.update(extra_header)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            for key in sorted(header):
                fh.write(f"# {key}: {json.dumps(header[key], sort_keys=True)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for rec in result.records:
                w.writerow([_fmt(getattr(rec, c)) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV {path}: {exc}") from exc


def read_csv(path) -> SweepResult:
    """Parse a file written by :func:`write_csv`."""
    path = Path(path)
    header = {}
    rows = []
    with path.open(encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            header[key] = json.loads(val)
        else:
            body.append(line)
    reader = csv.reader(body)
    cols = next(reader)
    if tuple(cols) != CSV_COLUMNS:
        raise ValueError(f"unexpected columns in {path}: {cols}")
    for row in reader:
        d = dict(zip(cols, row))
        rows.append(SweepRecord(
            **{c: float(d[c]) for c in CSV_COLUMNS[:11]},
            converged=d["converged"] == "true",
            iterations=int(d["iterations"]),
            method=d["method"],
        ))
    flux = np.unique([r.flux_ratio for r in rows])
    bias = np.unique([r.bias for r in rows])
    return SweepResult(None, flux, bias, rows, header)


def symmetry_report(result: SweepResult) -> dict:
    """Largest violations of the flux and bias reflection properties of I_pump.

    Needs grids symmetric about zero on both axes.  The bias parity is odd
    for the symmetric geometry and even for the asymmetric one.
    """
    f, b = result.flux_values, result.bias_values
    if not (np.allclose(f, -f[::-1], atol=1e-12) and np.allclose(b, -b[::-1], atol=1e-12)):
        raise ValueError("symmetry checks need axes symmetric about zero")
    I = result.grid("I_pump")
    geometry = result.spec.geometry if result.spec else result.header.get("spec", {}).get("geometry")
    flux_odd = float(np.max(np.abs(I + I[::-1, :])))
    bias_odd = float(np.max(np.abs(I + I[:, ::-1])))
    bias_even = float(np.max(np.abs(I - I[:, ::-1])))
    return {
        "geometry": geometry,
        "flux_antisymmetry": flux_odd,
        "bias_antisymmetry": bias_odd,
        "bias_symmetry": bias_even,
        "max_abs_pump": float(np.max(np.abs(I))),
    }


@dataclass
class ScanResult:
    geometry: str
    ec_values: np.ndarray
    k_values: np.ndarray
    flux_grid: np.ndarray
    bias: float
    pump: np.ndarray        # (n_ec, n_k, n_flux)
    converged: np.ndarray   # same shape

    @property
    def max_abs_pump(self) -> np.ndarray:
        return np.abs(self.pump).max(axis=2)

    @property
    def argmax_flux(self) -> np.ndarray:
        return self.flux_grid[np.abs(self.pump).argmax(axis=2)]


def _scan_task(task):
    geometry, params_list, config = task
    out = []
    for p in params_list:
        rec, _ = _solve_point(geometry, p, "fixed_point", config)
        out.append((rec.I_pump, rec.converged))
    return out


def scan_capacitance(geometry: str, ec_values, k_values, bias: float = 1.0,
                     flux_grid=None, gamma_up: float = 100.0, gamma: float = 1.0,
                     config: FixedPointConfig = FixedPointConfig(),
                     bias_split: str = "left", threads: int | None = None) -> ScanResult:
    """Flux-maximized pumped current for each (E_C, K) pair at fixed bias."""
    if geometry not in GEOMETRIES:
        raise ValueError(f"geometry must be one of {GEOMETRIES}")
    flux_grid = np.arange(0.0, 1.0, 0.01) if flux_grid is None else np.asarray(flux_grid, float)
    if flux_grid.size < 2:
        raise ValueError("flux grid needs at least two points")
    step = float(np.min(np.diff(np.sort(flux_grid))))
    if np.ptp(flux_grid) + step < 1.0 - 1e-9:
        raise ValueError("flux grid must cover at least one flux quantum")
    ec_values = np.asarray(ec_values, float)
    k_values = np.asarray(k_values, float)
    tasks = []
    for ec in ec_values:
        for K in k_values:
            base = PumpParams(K=float(K), E_C=float(ec), gamma_up_base=gamma_up, bias=bias,
                              gamma=gamma, bias_split=bias_split)
            tasks.append((geometry, [base.replace(flux=FluxSpec(float(f))) for f in flux_grid], config))
    workers = min(resolve_threads(threads), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_scan_task, tasks))
    else:
        rows = [_scan_task(t) for t in tasks]
    shape = (ec_values.size, k_values.size, flux_grid.size)
    pump = np.array([[v for v, _ in row] for row in rows]).reshape(shape)
    conv = np.array([[c for _, c in row] for row in rows]).reshape(shape)
    return ScanResult(geometry, ec_values, k_values, flux_grid, bias, pump, conv)


def write_scan_csv(scan: ScanResult, path, header: dict | None = None) -> None:
    path = Path(path)
    header = dict(header or {})
    header.setdefault("jjpump_version", __version__)
    header.setdefault("geometry", scan.geometry)
    header.setdefault("bias", scan.bias)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for key in sorted(header):
            fh.write(f"# {key}: {json.dumps(header[key], sort_keys=True)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["E_C", "K", "max_abs_I_pump", "argmax_flux_ratio", "all_converged"])
        for i, ec in enumerate(scan.ec_values):
            for j, K in enumerate(scan.k_values):
                w.writerow([_fmt(ec), _fmt(K), _fmt(scan.max_abs_pump[i, j]),
                            _fmt(scan.argmax_flux[i, j]), _fmt(bool(scan.converged[i, j].all()))])


# red - white - blue, interpolated in RGB
_DIVERGING = np.array([
    [0.020, 0.188, 0.380],
    [0.129, 0.400, 0.675],
    [0.573, 0.773, 0.871],
    [0.969, 0.969, 0.969],
    [0.957, 0.647, 0.510],
    [0.839, 0.376, 0.302],
    [0.404, 0.000, 0.122],
])


def _color(u: float) -> str:
    """Map u in [-1, 1] onto the diverging palette."""
    x = (np.clip(u, -1.0, 1.0) + 1.0) / 2.0 * (len(_DIVERGING) - 1)
    i = min(int(x), len(_DIVERGING) - 2)
    rgb = _DIVERGING[i] + (x - i) * (_DIVERGING[i + 1] - _DIVERGING[i])
    r, g, b = (int(round(255 * c)) for c in rgb)
    return f"#{r:02x}{g:02x}{b:02x}"


def render_heatmap_svg(result: SweepResult, quantity: str = "I_pump", path=None,
                       width: int = 520, height: int = 420, title: str | None = None,
                       center: float = 0.0) -> str:
    """Standalone SVG heatmap: flux on x, bias on y, symmetric diverging scale.

    Non-converged cells are overlaid with a hatch pattern.  Returns the SVG
    text and writes it to ``path`` when given.
    """
    if quantity not in CSV_COLUMNS[2:11]:
        raise ValueError(f"cannot plot {quantity!r}")
    data = result.grid(quantity) - center
    conv = result.converged_grid()
    flux, bias = result.flux_values, result.bias_values
    nf, nb = flux.size, bias.size
    vmax = float(np.max(np.abs(data))) if data.size else 0.0
    scale = vmax if vmax > 0 else 1.0

    left, right, top, bottom = 70, 110, 40, 60
    pw, ph = width - left - right, height - top - bottom
    cw, ch = pw / nf, ph / nb

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width),
                     height=str(height), viewBox=f"0 0 {width} {height}")
    defs = ET.SubElement(svg, "defs")
    pat = ET.SubElement(defs, "pattern", id="hatch", width="6", height="6",
                        patternUnits="userSpaceOnUse", patternTransform="rotate(45)")
    ET.SubElement(pat, "line", x1="0", y1="0", x2="0", y2="6", stroke="#000000",
                  **{"stroke-width": "1.5"})
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="#ffffff")
    if title:
        ET.SubElement(svg, "text", x=str(left + pw / 2), y="22", **{"text-anchor": "middle",
                      "font-size": "14", "font-family": "sans-serif"}).text = title

    cells = ET.SubElement(svg, "g", id="cells")
    for i in range(nf):
        for j in range(nb):
            x = left + i * cw
            y = top + (nb - 1 - j) * ch  # bias increases upward
            attrs = dict(x=f"{x:.3f}", y=f"{y:.3f}", width=f"{cw + 0.01:.3f}",
                         height=f"{ch + 0.01:.3f}", fill=_color(data[i, j] / scale))
            ET.SubElement(cells, "rect", **attrs)
            if not conv[i, j]:
                ET.SubElement(cells, "rect", **{**attrs, "fill": "url(#hatch)"})

    axes = ET.SubElement(svg, "g", id="axes", stroke="#000000", fill="none")
    ET.SubElement(axes, "rect", x=str(left), y=str(top), width=str(pw), height=str(ph))
    font = {"font-size": "11", "font-family": "sans-serif", "text-anchor": "middle"}
    labels = ET.SubElement(svg, "g", id="labels")
    for frac in (0.0, 0.5, 1.0):
        fx = flux[0] + frac * (flux[-1] - flux[0])
        ET.SubElement(labels, "text", x=f"{left + frac * pw:.2f}", y=str(top + ph + 16),
                      **font).text = f"{fx:.3g}"
        by = bias[0] + frac * (bias[-1] - bias[0])
        ET.SubElement(labels, "text", x=str(left - 8), y=f"{top + (1 - frac) * ph + 4:.2f}",
                      **{**font, "text-anchor": "end"}).text = f"{by:.3g}"
    ET.SubElement(labels, "text", x=str(left + pw / 2), y=str(height - 18), **font).text = "Φ/Φ₀"
    ET.SubElement(labels, "text", x="18", y=str(top + ph / 2),
                  transform=f"rotate(-90 18 {top + ph / 2})", **font).text = "Γ/γ"

    bar = ET.SubElement(svg, "g", id="colorbar")
    bx, bw, steps = width - right + 25, 16, 64
    for s in range(steps):
        u = 1.0 - 2.0 * (s + 0.5) / steps
        ET.SubElement(bar, "rect", x=str(bx), y=f"{top + s * ph / steps:.3f}", width=str(bw),
                      height=f"{ph / steps + 0.01:.3f}", fill=_color(u))
    ET.SubElement(bar, "rect", x=str(bx), y=str(top), width=str(bw), height=str(ph),
                  fill="none", stroke="#000000")
    for frac, val in ((0.0, vmax), (0.5, 0.0), (1.0, -vmax)):
        ET.SubElement(bar, "text", x=str(bx + bw + 4), y=f"{top + frac * ph + 4:.2f}",
                      **{**font, "text-anchor": "start"}).text = f"{val + center:.3g}"
    ET.SubElement(bar, "text", x=str(bx + bw / 2), y=str(top - 8), **font).text = quantity

    text = ET.tostring(svg, encoding="unicode")
    text = '<?xml version="1.0" encoding="UTF-8"?>\n' + text + "\n"
    if path is not None:
        path = Path(path)
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write SVG {path}: {exc}") from exc
    return text
