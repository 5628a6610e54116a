"""Phase-diagram sweeps: physical-knob mapping, grids, parallel execution,
persistence.

Experimental control knobs map to model rates as

    J = n <sigma_ex v>          (optionally divided by the slow-down q)
    I = s_axis * Phi * attenuation(n)

with attenuation either the point value exp(-n sigma_e L), its path average
(1 - exp(-n sigma_e L)) / (n sigma_e L), or off.  Only the product
n sigma_e L matters for the diagram topology; sigma_e defaults to a
Lorentzian wing estimate of the pump-detuned absorption cross-section.

Grids may equally be specified directly on the calibrated (I/Gamma,
J/Gamma) axes.  Each cell runs an independent steady-state and
response-time simulation; results are deterministic and independent of the
worker count because cells never share state.
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import units
from .dynamics import (
    GAMMA_BASE,
    CompiledModel,
    IntegrationError,
    SimParams,
    steady_state,
)

SCHEMA_VERSION = 1


def lorentzian_cross_section(detuning: float | None = None,
                             hwhm: float | None = None,
                             peak_cm2: float = 2.2e-11) -> float:
    """Absorption cross-section in the Lorentzian wing, cm^2.

    ``peak_cm2`` is the pressure-broadened on-resonance value; the default
    numbers give roughly 8e-13 cm^2 at the pump detuning."""
    if detuning is None:
        detuning = units.frequency("700 MHz")
    if hwhm is None:
        hwhm = units.frequency("137 MHz")
    return peak_cm2 * hwhm ** 2 / (detuning ** 2 + hwhm ** 2)


@dataclass(frozen=True)
class ConditionsMap:
    """Physical constants mapping (density, power) to (J, I)."""

    sigma_ex_v: float = 7e-10          # cm^3/s
    s_axis: float = 10.0               # axis-rate (1/s) per mW at n -> 0
    sigma_e: float = field(default_factory=lorentzian_cross_section)
    cell_length: float = 1.5           # cm
    attenuation_mode: str = "path-averaged"
    j_convention: str = "collision-rate"  # or "measured" (divides by q)
    q_slowdown: float = 4.57

    def __post_init__(self):
        for name in ("sigma_ex_v", "s_axis", "sigma_e", "cell_length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.attenuation_mode not in ("point", "path-averaged", "off"):
            raise ValueError(f"unknown attenuation mode {self.attenuation_mode!r}")
        if self.j_convention not in ("collision-rate", "measured"):
            raise ValueError(f"unknown J convention {self.j_convention!r}")

    def attenuation(self, n: float) -> float:
        od = n * self.sigma_e * self.cell_length
        if self.attenuation_mode == "off" or od == 0.0:
            return 1.0
        if self.attenuation_mode == "point":
            return math.exp(-od)
        return (1.0 - math.exp(-od)) / od

    def density_from_j(self, j_rate: float) -> float:
        n = j_rate / self.sigma_ex_v
        if self.j_convention == "measured":
            n *= self.q_slowdown
        return n


def map_conditions(n: float, phi: float, cmap: ConditionsMap) -> tuple[float, float]:
    """(density cm^-3, power mW) -> (J rate, effective I rate), both 1/s."""
    if n < 0 or phi < 0:
        raise ValueError("density and power must be >= 0")
    j = n * cmap.sigma_ex_v
    if cmap.j_convention == "measured":
        j /= cmap.q_slowdown
    i = cmap.s_axis * phi * cmap.attenuation(n)
    return j, i


@dataclass(frozen=True)
class SweepGrid:
    """Rectangular grid of sweep points on the (I/Gamma, J/Gamma) axes.

    ``densities`` / ``powers`` carry the physical labels when the grid was
    built from them (NaN otherwise)."""

    i_over_gamma: tuple[float, ...]
    j_over_gamma: tuple[float, ...]
    densities: tuple[float, ...]
    powers: tuple[float, ...]

    def __post_init__(self):
        for name in ("i_over_gamma", "j_over_gamma"):
            ax = getattr(self, name)
            if len(ax) == 0:
                raise ValueError(f"{name} axis is empty")
            if any(b <= a for a, b in zip(ax, ax[1:])):
                raise ValueError(f"{name} axis must be strictly increasing")

    @classmethod
    def from_rates(cls, i_over_gamma, j_over_gamma,
                   cmap: ConditionsMap | None = None,
                   gamma: float = GAMMA_BASE) -> "SweepGrid":
        """Grid on the rate axes; densities derived from J when a map is
        given (so attenuation can be applied), powers left unlabeled."""
        i_ax = tuple(float(x) for x in i_over_gamma)
        j_ax = tuple(float(x) for x in j_over_gamma)
        if cmap is not None:
            dens = tuple(cmap.density_from_j(j * gamma) for j in j_ax)
        else:
            dens = tuple(float("nan") for _ in j_ax)
        pows = tuple(float("nan") for _ in i_ax)
        return cls(i_over_gamma=i_ax, j_over_gamma=j_ax,
                   densities=dens, powers=pows)

    @classmethod
    def from_physical(cls, densities, powers, cmap: ConditionsMap,
                      gamma: float = GAMMA_BASE) -> "SweepGrid":
        dens = tuple(float(n) for n in densities)
        pows = tuple(float(p) for p in powers)
        j_ax = tuple(map_conditions(n, 0.0, cmap)[0] / gamma for n in dens)
        # I axis labels use the unattenuated rate; attenuation is applied
        # per-cell from the density of each row.
        i_ax = tuple(cmap.s_axis * p / gamma for p in pows)
        return cls(i_over_gamma=i_ax, j_over_gamma=j_ax,
                   densities=dens, powers=pows)

    def cells(self):
        for jj, j in enumerate(self.j_over_gamma):
            for ii, i in enumerate(self.i_over_gamma):
                yield ii, jj, i, j


@dataclass
class CellResult:
    i_over_gamma: float
    j_over_gamma: float
    n: float
    phi: float
    i_effective: float
    m_signed: float
    m_abs: float
    tau_s: float
    tau_floored: bool
    converged: bool
    eps: float
    error: str = ""


@dataclass
class SweepResult:
    grid: SweepGrid
    cells: list[CellResult]
    provenance: dict

    def cell(self, ii: int, jj: int) -> CellResult:
        return self.cells[jj * len(self.grid.i_over_gamma) + ii]

    def m_abs_matrix(self) -> np.ndarray:
        ni, nj = len(self.grid.i_over_gamma), len(self.grid.j_over_gamma)
        return np.array([c.m_abs for c in self.cells]).reshape(nj, ni)

    def tau_matrix(self) -> np.ndarray:
        ni, nj = len(self.grid.i_over_gamma), len(self.grid.j_over_gamma)
        return np.array([c.tau_s for c in self.cells]).reshape(nj, ni)

    def apply_tau_floor(self, gamma: float, fraction: float = 1e-3) -> None:
        """Replace tau by T1 wherever the response is below ``fraction`` of
        the map's maximal magnetization."""
        m_max = max((c.m_abs for c in self.cells if c.converged), default=0.0)
        t1 = 1.0 / gamma
        for c in self.cells:
            if c.converged and c.m_abs < fraction * m_max:
                c.tau_s = t1
                c.tau_floored = True


def _sweep_task(args):
    (ii, jj, i_axis, j_axis, i_eff, n, phi, gamma, mode, eps, b_z,
     floor_reference, max_time) = args
    try:
        p = SimParams.from_rates(i_over_gamma=i_eff, j_over_gamma=j_axis,
                                 gamma=gamma, projection_mode=mode,
                                 seed_polarization=eps, b_z=b_z)
        model = CompiledModel(p)
        res = steady_state(p, max_time=max_time, model=model)
        if res.converged:
            if abs(res.m_ss) < 1e-3 * floor_reference:
                tau, floored = 1.0 / gamma, True
            else:
                tau = res.trajectory.response_crossing(0.63)
                floored = False
            return ii, jj, CellResult(
                i_over_gamma=i_axis, j_over_gamma=j_axis, n=n, phi=phi,
                i_effective=i_eff, m_signed=res.m_ss, m_abs=abs(res.m_ss),
                tau_s=tau, tau_floored=floored, converged=True, eps=eps)
        # flagged non-steady result: keep the partial magnetization
        return ii, jj, CellResult(
            i_over_gamma=i_axis, j_over_gamma=j_axis, n=n, phi=phi,
            i_effective=i_eff, m_signed=res.m_ss, m_abs=abs(res.m_ss),
            tau_s=float("nan"), tau_floored=False, converged=False, eps=eps,
            error=f"no steady state within {res.t_converge:.1f} s")
    except IntegrationError as exc:
        return ii, jj, CellResult(
            i_over_gamma=i_axis, j_over_gamma=j_axis, n=n, phi=phi,
            i_effective=i_eff, m_signed=float("nan"), m_abs=float("nan"),
            tau_s=float("nan"), tau_floored=False, converged=False, eps=eps,
            error=str(exc))


def default_workers() -> int:
    env = os.environ.get("SPINGAS_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def run_sweep(grid: SweepGrid, gamma: float = GAMMA_BASE,
              cmap: ConditionsMap | None = None,
              projection_mode: str = "hyperfine+zeeman",
              seed_polarization: float = 1e-4, b_z: float = 1.0,
              workers: int | None = None,
              max_time: float | None = None) -> SweepResult:
    """Run steady-state and response-time simulations over a grid.

    Cell failures are recorded per cell and never abort the sweep.  The
    output is bitwise independent of the worker count."""
    cmap = cmap if cmap is not None else ConditionsMap()
    workers = workers if workers is not None else default_workers()
    tasks = []
    for ii, jj, i_axis, j_axis in grid.cells():
        n = grid.densities[jj]
        phi = grid.powers[ii]
        att = cmap.attenuation(n) if math.isfinite(n) else 1.0
        i_eff = i_axis * att
        tasks.append((ii, jj, i_axis, j_axis, i_eff, n, phi, gamma,
                      projection_mode, seed_polarization, b_z, 1.0, max_time))
    ni = len(grid.i_over_gamma)
    cells: list[CellResult | None] = [None] * (ni * len(grid.j_over_gamma))
    if workers <= 1 or len(tasks) <= 2:
        results = map(_sweep_task, tasks)
    else:
        ctx = multiprocessing.get_context("fork")
        pool = ctx.Pool(processes=workers)
        try:
            results = pool.map(_sweep_task, tasks, chunksize=4)
        finally:
            pool.close()
            pool.join()
    for ii, jj, cell in results:
        cells[jj * ni + ii] = cell
    result = SweepResult(
        grid=grid, cells=cells,
        provenance={
            "schema_version": SCHEMA_VERSION,
            "code_version": __version__,
            "gamma": gamma,
            "projection_mode": projection_mode,
            "seed_polarization": seed_polarization,
            "b_z": b_z,
            "attenuation_mode": cmap.attenuation_mode,
            "sigma_e": cmap.sigma_e,
            "sigma_ex_v": cmap.sigma_ex_v,
            "cell_length": cmap.cell_length,
            "j_convention": cmap.j_convention,
            "migrations": [],
        })
    result.apply_tau_floor(gamma)
    return result


def extract_contour(result: SweepResult, axis: str, value: float,
                    quantity: str = "m_abs") -> tuple[np.ndarray, np.ndarray]:
    """1-D series along the nearest grid line.

    ``axis='fixed-J'`` returns (I/Gamma, quantity) on the J line nearest
    ``value``; ``axis='fixed-I'`` the transpose.  No interpolation between
    lines is attempted (nearest-grid-line semantics)."""
    gi = np.array(result.grid.i_over_gamma)
    gj = np.array(result.grid.j_over_gamma)
    mat = result.m_abs_matrix() if quantity == "m_abs" else result.tau_matrix()
    if axis == "fixed-J":
        if not gj[0] <= value <= gj[-1]:
            raise ValueError(f"J/Gamma = {value} outside grid range")
        jj = int(np.argmin(np.abs(gj - value)))
        return gi.copy(), mat[jj, :].copy()
    if axis == "fixed-I":
        if not gi[0] <= value <= gi[-1]:
            raise ValueError(f"I/Gamma = {value} outside grid range")
        ii = int(np.argmin(np.abs(gi - value)))
        return gj.copy(), mat[:, ii].copy()
    raise ValueError("axis must be 'fixed-J' or 'fixed-I'")


def refine_contour(axis: str, value: float, points, gamma: float = GAMMA_BASE,
                   quantity: str = "m_signed", workers: int | None = None,
                   **sim_kwargs) -> tuple[np.ndarray, np.ndarray]:
    """Dense 1-D series computed directly (no 2-D sweep), for fitting.

    ``axis='fixed-J'`` varies I/Gamma over ``points`` at J/Gamma = value;
    ``axis='fixed-I'`` varies J/Gamma.  ``quantity`` is 'm_signed', 'm_abs'
    or 'tau'."""
    points = [float(x) for x in points]
    tasks = []
    for x in points:
        i_ax, j_ax = (x, value) if axis == "fixed-J" else (value, x)
        tasks.append((0, 0, i_ax, j_ax, i_ax, float("nan"), float("nan"),
                      gamma, sim_kwargs.get("projection_mode", "hyperfine+zeeman"),
                      sim_kwargs.get("seed_polarization", 1e-4),
                      sim_kwargs.get("b_z", 1.0), 1.0,
                      sim_kwargs.get("max_time")))
    workers = workers if workers is not None else default_workers()
    if workers <= 1 or len(tasks) <= 2:
        results = list(map(_sweep_task, tasks))
    else:
        ctx = multiprocessing.get_context("fork")
        pool = ctx.Pool(processes=workers)
        try:
            results = pool.map(_sweep_task, tasks, chunksize=1)
        finally:
            pool.close()
            pool.join()
    ys = []
    for (_, _, cell), x in zip(results, points):
        if quantity == "tau":
            ys.append(cell.tau_s)
        elif quantity == "m_abs":
            ys.append(cell.m_abs)
        else:
            ys.append(cell.m_signed)
    return np.array(points), np.array(ys)


CSV_COLUMNS = ("n", "phi", "J_over_Gamma", "I_over_Gamma", "I_effective",
               "M_signed", "M_abs", "tau_s", "tau_floored", "converged",
               "eps", "error")


def save_sweep(result: SweepResult, csv_path: str, manifest_path: str | None = None,
               header_comment: str | None = None) -> None:
    """Write the per-cell CSV and a JSON manifest (atomic rename)."""
    tmp = csv_path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for c in result.cells:
            w.writerow([
                f"{c.n:.17g}", f"{c.phi:.17g}", f"{c.j_over_gamma:.17g}",
                f"{c.i_over_gamma:.17g}", f"{c.i_effective:.17g}",
                f"{c.m_signed:.17g}", f"{c.m_abs:.17g}", f"{c.tau_s:.17g}",
                int(c.tau_floored), int(c.converged), f"{c.eps:.17g}", c.error,
            ])
    os.replace(tmp, csv_path)
    if manifest_path is not None:
        manifest = {
            "provenance": result.provenance,
            "grid": {
                "i_over_gamma": list(result.grid.i_over_gamma),
                "j_over_gamma": list(result.grid.j_over_gamma),
                "densities": [None if math.isnan(x) else x for x in result.grid.densities],
                "powers": [None if math.isnan(x) else x for x in result.grid.powers],
            },
        }
        tmp = manifest_path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, manifest_path)


class SchemaError(RuntimeError):
    pass


def load_sweep(csv_path: str, manifest_path: str) -> SweepResult:
    """Lossless load of a saved sweep; older schema versions are migrated
    with a note in the provenance."""
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read manifest: {exc}") from exc
    prov = manifest.get("provenance", {})
    version = prov.get("schema_version")
    migrations = list(prov.get("migrations", []))
    if version == 0:
        migrations.append("migrated schema 0 -> 1: filled tau_floored from tau == T1")
        version = 1
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported sweep schema version {version!r}")
    prov["schema_version"] = version
    prov["migrations"] = migrations
    gspec = manifest.get("grid")
    if gspec is None:
        raise SchemaError("manifest lacks the grid block")
    nan = float("nan")
    grid = SweepGrid(
        i_over_gamma=tuple(gspec["i_over_gamma"]),
        j_over_gamma=tuple(gspec["j_over_gamma"]),
        densities=tuple(nan if x is None else x for x in gspec["densities"]),
        powers=tuple(nan if x is None else x for x in gspec["powers"]),
    )
    cells = []
    try:
        with open(csv_path, newline="") as fh:
            reader = csv.DictReader(row for row in fh if not row.startswith("#"))
            if reader.fieldnames is None or set(reader.fieldnames) - set(CSV_COLUMNS):
                raise SchemaError(f"unexpected CSV columns {reader.fieldnames!r}")
            for row in reader:
                cells.append(CellResult(
                    i_over_gamma=float(row["I_over_Gamma"]),
                    j_over_gamma=float(row["J_over_Gamma"]),
                    n=float(row["n"]), phi=float(row["phi"]),
                    i_effective=float(row["I_effective"]),
                    m_signed=float(row["M_signed"]), m_abs=float(row["M_abs"]),
                    tau_s=float(row["tau_s"]),
                    tau_floored=bool(int(row["tau_floored"])),
                    converged=bool(int(row["converged"])),
                    eps=float(row["eps"]), error=row["error"],
                ))
    except (OSError, ValueError, KeyError) as exc:
        raise SchemaError(f"cannot parse sweep CSV: {exc}") from exc
    expected = len(grid.i_over_gamma) * len(grid.j_over_gamma)
    if len(cells) != expected:
        raise SchemaError(f"expected {expected} cells, found {len(cells)}")
    return SweepResult(grid=grid, cells=cells, provenance=prov)


def gnuplot_matrix(result: SweepResult, quantity: str = "m_abs") -> str:
    """Nonuniform-matrix text block for gnuplot heat maps."""
    gi = result.grid.i_over_gamma
    gj = result.grid.j_over_gamma
    mat = result.m_abs_matrix() if quantity == "m_abs" else result.tau_matrix()
    lines = [" ".join([str(len(gi))] + [f"{x:.10g}" for x in gi])]
    for jj, j in enumerate(gj):
        lines.append(" ".join([f"{j:.10g}"] + [f"{v:.10g}" for v in mat[jj]]))
    return "\n".join(lines) + "\n"


def density_scan(power_i_over_gamma: float, densities,
                 cmap: ConditionsMap | None = None, gamma: float = GAMMA_BASE,
                 workers: int | None = None, **sim_kwargs) -> SweepResult:
    """Fixed-power scan across vapor density (the re-entrance cut): the
    unattenuated pump axis rate stays constant while J grows with n and the
    effective I drops by attenuation."""
    cmap = cmap if cmap is not None else ConditionsMap()
    densities = tuple(float(n) for n in densities)
    j_ax = tuple(map_conditions(n, 0.0, cmap)[0] / gamma for n in densities)
    grid = SweepGrid(i_over_gamma=(power_i_over_gamma,), j_over_gamma=j_ax,
                     densities=densities, powers=(float("nan"),))
    return run_sweep(grid, gamma=gamma, cmap=cmap, workers=workers, **sim_kwargs)
