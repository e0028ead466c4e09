"""Declarative experiment plans, their runners and result files.

A plan is a small JSON document. Every runner returns a :class:`RunArtifact`
holding plain tables (written as CSV), fitted slopes and a summary; nothing
in the CSV bodies depends on wall-clock time, so identical plans give
byte-identical tables.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .checkpoint import save_checkpoint
from .data import annulus_data, band_packet, box_data, plane_wave, random_data, scale_to_energy
from .diagnostics import (
    cuboid_exponent,
    energy,
    exponents,
    kinetic_energy,
    fit_power_law,
    free_lq_norms,
    modified_energy,
    norm_record,
    nu_of_q,
    strichartz_exponent,
)
from .dynamics import IntegratorConfig, evolve
from .errors import BlowUpError, BudgetExceededError, InvalidInputError, PlanError
from .geometry import (
    DEFAULT_ENUMERATION_BUDGET,
    ResonanceQuery,
    TorusSpec,
    diophantine_margin,
    resonant_lattice_count,
    sample_generic_torus,
)
from .spectral import Box, Grid, MultiplierSpec

KINDS = ("simulate", "growth", "increment-scan", "strichartz-scan", "resonance-count", "diophantine-check")

# side lengths giving betas (1, 2^-1/2, 3^-1/2)
DEFAULT_LENGTHS = (1.0, 2.0**0.25, 3.0**0.25)

INCREMENT_FLOOR = 1e-13
# an increment within this factor of the energy drift over the same window is
# indistinguishable from integration error
DRIFT_FACTOR = 3.0
RATIONAL_TOL = 1e-12
JOBS_ENV = "TORUS_NLS_JOBS"


# ---------------------------------------------------------------------------
# plans


def _is_dyadic(n) -> bool:
    return isinstance(n, int) and n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class ExperimentPlan:
    kind: str
    p: float = 4.0
    modes_per_axis: int = 32
    dt: float = 1e-3
    sample_every: int = 1
    nonlinear: bool = True
    lengths: Optional[tuple] = None
    torus_seed: Optional[int] = None
    scales: tuple = ()
    windows: tuple = ((0.0, 1.0),)
    q: tuple = (4.0,)
    seed: int = 0
    out: Optional[str] = None
    # evolution and data
    T: float = 1.0
    data: str = "random"
    s: float = 2.0
    target_energy: float = 1.0
    wave_vector: tuple = (2, 1, 0)
    amplitude: float = 0.5
    # strichartz scan
    phases: str = "coherent"
    cadence: int = 8
    grid_per_scale: int = 4
    T_cap: float = 64.0
    long_window: bool = True
    cuboid_heights: tuple = ()
    # resonance and diophantine checks
    K: tuple = (8, 16, 32)
    n_generic: int = 10
    generic_range: tuple = (0.9, 1.1)
    c: float = 1.0
    n_max: int = 50
    budget: int = DEFAULT_ENUMERATION_BUDGET

    def __post_init__(self):
        conv = {
            "p": float, "dt": float, "T": float, "s": float, "target_energy": float,
            "amplitude": float, "T_cap": float, "c": float,
            "modes_per_axis": int, "sample_every": int, "seed": int, "cadence": int,
            "grid_per_scale": int, "n_generic": int, "n_max": int, "budget": int,
        }
        for name, typ in conv.items():
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise PlanError(f"{name} must be a number, got {v!r}")
            if typ is int and v != int(v):
                raise PlanError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, typ(v))
        try:
            object.__setattr__(self, "scales", tuple(self._int(n, "scales") for n in self.scales))
            object.__setattr__(self, "windows", tuple((float(a), float(b)) for a, b in self.windows))
            object.__setattr__(self, "q", tuple(float(x) for x in self.q))
            object.__setattr__(self, "K", tuple(self._int(k, "K") for k in self.K))
            object.__setattr__(self, "cuboid_heights", tuple(self._int(h, "cuboid_heights") for h in self.cuboid_heights))
            object.__setattr__(self, "wave_vector", tuple(self._int(k, "wave_vector") for k in self.wave_vector))
            object.__setattr__(self, "generic_range", tuple(float(x) for x in self.generic_range))
            if self.lengths is not None:
                object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        except (TypeError, ValueError) as exc:
            raise PlanError(f"malformed list field: {exc}") from None
        self._validate()

    @staticmethod
    def _int(v, name) -> int:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
            raise PlanError(f"{name} entries must be integers, got {v!r}")
        return int(v)

    def _validate(self):
        if self.kind not in KINDS:
            raise PlanError(f"unknown kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not 3.0 < self.p < 5.0:
            raise PlanError(f"p must lie in (3, 5), got {self.p}")
        if not _is_dyadic(self.modes_per_axis) or self.modes_per_axis < 4:
            raise PlanError(f"grid.modes_per_axis must be a power of two >= 4, got {self.modes_per_axis}")
        if not (math.isfinite(self.dt) and self.dt > 0) or self.sample_every < 1:
            raise PlanError("integrator.dt must be positive and sample_every >= 1")
        if self.lengths is not None and self.torus_seed is not None:
            raise PlanError("give torus.lengths or torus.seed, not both")
        if self.lengths is not None and (len(self.lengths) != 3 or min(self.lengths) <= 0):
            raise PlanError(f"torus.lengths must be three positive numbers, got {self.lengths}")
        for n in self.scales:
            if not _is_dyadic(n):
                raise PlanError(f"scales must be dyadic integers, got {n}")
        for a, b in self.windows:
            if not (0.0 <= a < b and math.isfinite(b)):
                raise PlanError(f"window ({a}, {b}) must satisfy 0 <= a < b")
        if any(x < 1 for x in self.q):
            raise PlanError("q entries must be >= 1")
        if not (self.T > 0 and self.target_energy > 0 and self.T_cap > 0):
            raise PlanError("T, target_energy and T_cap must be positive")
        if self.data not in ("random", "plane-wave", "packet"):
            raise PlanError(f"unknown data model {self.data!r}")
        if self.phases not in ("random", "coherent"):
            raise PlanError(f"unknown phase model {self.phases!r}")
        if self.cadence < 1 or self.grid_per_scale < 0:
            raise PlanError("cadence must be >= 1 and grid_per_scale >= 0")
        if len(self.wave_vector) != 3:
            raise PlanError("wave_vector needs three entries")
        if len(self.generic_range) != 2 or not 0 < self.generic_range[0] < self.generic_range[1]:
            raise PlanError(f"generic_range must be (low, high) with 0 < low < high, got {self.generic_range}")
        if any(k < 1 for k in self.K) or any(h < 1 for h in self.cuboid_heights):
            raise PlanError("K and cuboid_heights entries must be positive")
        if self.n_generic < 1 or self.n_max < 1 or self.budget < 1 or self.c < 0:
            raise PlanError("n_generic, n_max, budget must be positive and c >= 0")
        if self.kind == "increment-scan" and len(self.scales) < 3:
            raise PlanError("increment-scan needs at least three scales")
        if self.kind == "strichartz-scan" and not self.scales:
            raise PlanError("strichartz-scan needs at least one scale")

    # -- derived objects ----------------------------------------------------

    @property
    def grid(self) -> Grid:
        return Grid(self.modes_per_axis)

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.dt, self.p, sample_every=self.sample_every, nonlinear=self.nonlinear)

    @property
    def torus(self) -> TorusSpec:
        if self.torus_seed is not None:
            return sample_generic_torus(self.torus_seed, *self.generic_range)
        return TorusSpec(self.lengths if self.lengths is not None else DEFAULT_LENGTHS)

    def unresolved_scales(self) -> list[int]:
        """Scales whose transition band N..2N is not resolved (N > k_max/4)."""
        return [n for n in self.scales if n > self.grid.k_max / 4]

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        out = {
            "kind": d.pop("kind"),
            "grid": {"modes_per_axis": d.pop("modes_per_axis")},
            "integrator": {
                "dt": d.pop("dt"),
                "sample_every": d.pop("sample_every"),
                "nonlinear": d.pop("nonlinear"),
            },
        }
        lengths, seed = d.pop("lengths"), d.pop("torus_seed")
        out["torus"] = {"seed": seed} if seed is not None else {"lengths": list(lengths or DEFAULT_LENGTHS)}
        for k, v in d.items():
            out[k] = [list(x) if isinstance(x, tuple) else x for x in v] if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentPlan":
        if not isinstance(raw, dict):
            raise PlanError("plan must be a JSON object")
        d = dict(raw)
        kw = {}
        nested = {
            "grid": {"modes_per_axis": "modes_per_axis"},
            "integrator": {"dt": "dt", "sample_every": "sample_every", "nonlinear": "nonlinear"},
            "torus": {"lengths": "lengths", "seed": "torus_seed"},
        }
        for group, keys in nested.items():
            sub = d.pop(group, None)
            if sub is None:
                continue
            if not isinstance(sub, dict):
                raise PlanError(f"{group} must be an object")
            for k, v in sub.items():
                if k not in keys:
                    raise PlanError(f"unknown key {group}.{k}")
                kw[keys[k]] = v
        known = {f.name for f in fields(cls)}
        for k, v in d.items():
            if k not in known:
                raise PlanError(f"unknown plan key {k!r}")
            kw[k] = v
        if "kind" not in kw:
            raise PlanError("plan has no kind")
        try:
            return cls(**kw)
        except InvalidInputError as exc:
            raise PlanError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        path = Path(path)
        if not path.is_file():
            raise PlanError(f"plan file {path} not found", code="plan_not_found")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise PlanError(f"plan file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    def plan_hash(self) -> str:
        d = self.to_dict()
        d.pop("out", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# artifacts


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: tuple(_sort_key(x) for x in r))


def _sort_key(x):
    return (0, float(x), "") if isinstance(x, (int, float)) else (1, 0.0, str(x))


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


@dataclass
class RunArtifact:
    plan: ExperimentPlan
    tables: dict = field(default_factory=dict)
    fits: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    fields_to_save: dict = field(default_factory=dict)  # name -> (SpectralField, t)
    checkpoints: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def plan_hash(self) -> str:
        return self.plan.plan_hash()

    def csv_text(self, name: str) -> str:
        table = self.tables[name]
        h = self.plan_hash
        lines = [",".join(["plan_hash"] + list(table.columns))]
        for row in table.sorted_rows():
            lines.append(",".join([h] + [_fmt(x) for x in row]))
        return "\n".join(lines) + "\n"

    def summary_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "plan_hash": self.plan_hash,
            "fits": self.fits,
            "summary": self.summary,
            "flags": self.flags,
            "tables": sorted(f"{n}.csv" for n in self.tables),
            "checkpoints": self.checkpoints,
            "timing": {"elapsed_s": self.elapsed},
        }

    def write(self, out=None) -> Path:
        out = Path(out if out is not None else self.plan.out or "results")
        out.mkdir(parents=True, exist_ok=True)
        for name in self.tables:
            (out / f"{name}.csv").write_text(self.csv_text(name))
        torus = self.plan.torus
        self.checkpoints = []
        for name, (f, t) in sorted(self.fields_to_save.items()):
            path = save_checkpoint(out / f"{name}.tnls", f, torus.betas, self.plan.p, t)
            self.checkpoints.append(path.name)
        (out / "summary.json").write_text(json.dumps(_jsonable(self.summary_dict()), indent=2, sort_keys=True) + "\n")
        return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


# ---------------------------------------------------------------------------
# scheduling


def resolve_jobs(jobs: Optional[int] = None) -> int:
    env = os.environ.get(JOBS_ENV)
    if env is not None:
        try:
            jobs = int(env)
        except ValueError:
            raise PlanError(f"{JOBS_ENV}={env!r} is not an integer") from None
    jobs = 1 if jobs is None else int(jobs)
    if jobs < 1:
        raise PlanError(f"jobs must be >= 1, got {jobs}")
    return jobs


def map_cells(fn: Callable, cells: list, jobs: int = 1) -> list:
    """Apply ``fn`` to independent cells, at most ``jobs`` at a time, keeping order."""
    if jobs <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, cells))


# ---------------------------------------------------------------------------
# runners


def initial_data(plan: ExperimentPlan, grid: Optional[Grid] = None):
    grid = grid or plan.grid
    if plan.data == "plane-wave":
        return plane_wave(grid, plan.wave_vector, plan.amplitude)
    if plan.data == "packet":
        raise PlanError("packet data needs a scale; it is only used by increment-scan")
    f = random_data(grid, plan.s, 1.0, plan.seed)
    return scale_to_energy(f, plan.torus.betas, plan.p, plan.target_energy)


def _norm_rows(plan, spec):
    torus = plan.torus

    def on_sample(t, f):
        return norm_record(t, f, torus.betas, plan.p, spec)

    return on_sample


def _relative_drift(records, attr) -> float:
    ref = getattr(records[0], attr)
    return max(abs(getattr(r, attr) - ref) for r in records) / abs(ref)


def _conserved_drift(plan, records, fields) -> float:
    """Relative drift of the Hamiltonian of the flow actually run.

    With the nonlinearity switched off that is the kinetic energy.
    """
    if plan.nonlinear:
        return _relative_drift(records, "energy")
    kin = [kinetic_energy(f, plan.torus.betas) for f in fields]
    return max(abs(k - kin[0]) for k in kin) / abs(kin[0])


def run_simulate(plan: ExperimentPlan, jobs: int = 1) -> RunArtifact:
    t0 = time.perf_counter()
    u0 = initial_data(plan)
    spec = MultiplierSpec(2 * plan.grid.k_max)
    art = RunArtifact(plan)
    try:
        traj = evolve(u0, plan.T, plan.integrator, plan.torus, on_sample=_norm_rows(plan, spec), store=False)
    except BlowUpError as exc:
        _attach_norms(art, exc.partial.diagnostics)
        art.flags.append("blow_up")
        exc.artifact = art
        raise
    _attach_norms(art, traj.diagnostics)
    art.fields_to_save = {"initial": (u0, 0.0), "final": (traj.final, traj.samples[-1][0])}
    art.elapsed = time.perf_counter() - t0
    return art


def _attach_norms(art: RunArtifact, records):
    art.tables["norms"] = Table(
        ["t", "mass", "energy", "h1", "h2"],
        [[r.t, r.mass, r.energy, r.h1, r.h2] for r in records],
    )
    if records:
        art.summary.update(
            mass_drift=_relative_drift(records, "mass"),
            energy_drift=_relative_drift(records, "energy"),
            sup_h2=max(r.h2 for r in records),
            samples=len(records),
        )


MASS_TOL = 1e-8
ENERGY_TOL = 1e-5
REFERENCE_NOTE = (
    "ref_rational and ref_irrational are asymptotic upper bounds over unbounded time; "
    "they are not reproducible at finite T and no run is fitted against them. "
    "Growth runs are judged on conservation and determinism only."
)


def run_growth(plan: ExperimentPlan, jobs: int = 1) -> RunArtifact:
    """H^2 growth run with the reference exponent curves alongside.

    The reference columns are (1+t)^a for the rational and irrational growth
    exponents; they are emitted for plotting only.
    """
    t0 = time.perf_counter()
    ex = exponents(plan.p)
    a_rat, a_irr = float(ex.growth_rational), float(ex.growth_irrational)
    u0 = initial_data(plan)
    N = plan.scales[0] if plan.scales else 2 * plan.grid.k_max
    spec = MultiplierSpec(N)
    art = RunArtifact(plan)

    kept = []

    def on_sample(t, f):
        if not plan.nonlinear:
            kept.append(f)
        return norm_record(t, f, plan.torus.betas, plan.p, spec)

    def finish(records):
        art.tables["growth"] = Table(
            ["t", "mass", "energy", "h1", "h2", "modified_energy", "ref_rational", "ref_irrational"],
            [
                [r.t, r.mass, r.energy, r.h1, r.h2, r.modified_energy, (1 + r.t) ** a_rat, (1 + r.t) ** a_irr]
                for r in records
            ],
        )
        if records:
            md, ed = _relative_drift(records, "mass"), _conserved_drift(plan, records, kept)
            passed = md <= MASS_TOL and ed <= ENERGY_TOL
            art.summary.update(
                mass_drift=md,
                energy_drift=ed,
                sup_h2=max(r.h2 for r in records),
                h2_initial=records[0].h2,
                passed=passed,
                growth_exponent_rational=a_rat,
                growth_exponent_irrational=a_irr,
                modified_energy_scale=N,
                reference_note=REFERENCE_NOTE,
            )
            if not passed:
                art.flags.append("conservation_failed")
        art.elapsed = time.perf_counter() - t0

    try:
        traj = evolve(u0, plan.T, plan.integrator, plan.torus, on_sample=on_sample, store=False)
    except BlowUpError as exc:
        finish(exc.partial.diagnostics)
        art.flags.append("blow_up")
        exc.artifact = art
        raise
    finish(traj.diagnostics)
    art.fields_to_save = {"final": (traj.final, traj.samples[-1][0])}
    return art


def _window_grid_check(plan: ExperimentPlan):
    step = plan.dt * plan.sample_every
    for a, b in plan.windows:
        for t in (a, b):
            if abs(t / step - round(t / step)) > 1e-9:
                raise PlanError(f"window endpoint {t} is not a recorded time (cadence {step})")


def _increment_rows(plan, N, records, kmax):
    """records: {t: (energy, {N: modified energy})}."""
    rows = []
    for a, b in plan.windows:
        ea, ma = records[round(a, 12)]
        eb, mb = records[round(b, 12)]
        inc = mb[N] - ma[N]
        drift = eb - ea
        floored = abs(inc) < INCREMENT_FLOOR
        rows.append([
            N, a, b, max(abs(inc), INCREMENT_FLOOR), inc, drift,
            floored, abs(inc) <= DRIFT_FACTOR * abs(drift), N >= 2 * kmax, N <= kmax / 4,
            inc - drift,
        ])
    return rows


def run_increment_scan(plan: ExperimentPlan, jobs: int = 1) -> RunArtifact:
    """Modified-energy increments over each window for each scale N.

    ``data == "random"`` evolves one fixed data set and reads every N off the
    same trajectory. ``data == "packet"`` uses, for each N, a unit-energy
    coherent packet on the band N < |k| <= 2N (one evolution per N).
    """
    t0 = time.perf_counter()
    _window_grid_check(plan)
    grid, torus, p = plan.grid, plan.torus, plan.p
    kmax = grid.k_max
    T = max(b for _, b in plan.windows)
    specs = {N: MultiplierSpec(N) for N in plan.scales}

    def run_one(u0, scales):
        def on_sample(t, f):
            return (round(t, 12), energy(f, torus.betas, p),
                    {N: modified_energy(f, torus.betas, p, specs[N]) for N in scales})

        traj = evolve(u0, T, plan.integrator, torus, on_sample=on_sample, store=False)
        return {t: (e, m) for t, e, m in traj.diagnostics}

    rows = []
    if plan.data == "packet":
        def cell(N):
            u0 = scale_to_energy(band_packet(grid, N, plan.seed, plan.phases), torus.betas, p, plan.target_energy)
            return _increment_rows(plan, N, run_one(u0, [N]), kmax)

        for part in map_cells(cell, list(plan.scales), jobs):
            rows.extend(part)
    else:
        records = run_one(initial_data(plan), list(plan.scales))
        for N in plan.scales:
            rows.extend(_increment_rows(plan, N, records, kmax))

    art = RunArtifact(plan)
    art.tables["increments"] = Table(
        ["N", "t1", "t2", "increment", "signed_increment", "energy_drift",
         "floored", "drift_dominated", "identity", "resolved", "excess_increment"],
        rows,
    )
    ex = exponents(p)
    for a, b in plan.windows:
        inside = [r for r in rows if r[1] == a and r[2] == b and not r[8]]
        for kind, col in (("increment", 3), ("excess", 10)):
            # the excess fit (increment minus energy drift) is a diagnostic only
            pts = [(r[0], abs(r[col])) for r in inside if abs(r[col]) >= INCREMENT_FLOOR]
            fit = {"fit": kind, "window": [a, b], "scales": [n for n, _ in pts],
                   "drift_dominated": [r[0] for r in inside if r[7]],
                   "sigma_reference": float(ex.increment_rational),
                   "local_reference": float(ex.increment_local)}
            if len(pts) >= 3:
                slope, icpt, res = fit_power_law(pts)
                fit.update(slope=slope, intercept=icpt, residual=res)
            else:
                fit.update(slope=None, intercept=None, residual=None)
                if kind == "increment":
                    art.flags.append("too_few_scales_for_fit")
            art.fits.append(fit)
    for name, col in (("floored", 6), ("drift_dominated", 7)):
        if any(r[col] for r in rows):
            art.flags.append(name)
    if plan.unresolved_scales():
        art.flags.append("scales_above_kmax_over_4")
    art.summary.update(data=plan.data, unresolved_scales=plan.unresolved_scales())
    art.elapsed = time.perf_counter() - t0
    return art


def _scale_grid(plan: ExperimentPlan, N: int) -> Grid:
    return Grid(plan.grid_per_scale * N) if plan.grid_per_scale else plan.grid


def run_strichartz_scan(plan: ExperimentPlan, jobs: int = 1) -> RunArtifact:
    """Free-flow L^q norms of unit-mass annulus data against the scale N.

    Each N is sampled at cadence dt = 1/(cadence * N^2) on a grid of
    ``grid_per_scale * N`` modes per axis (``grid_per_scale = 0`` keeps the
    plan grid). The long-window branch covers [0, min(N^nu(q), T_cap)] with
    unit windows and sums their norms.
    """
    t0 = time.perf_counter()
    betas = plan.torus.betas
    qs = list(plan.q)
    art = RunArtifact(plan)

    def long_units(N, q):
        if q < 10 / 3:
            return 0, None, False
        span = float(N) ** float(nu_of_q(q))
        return max(1, math.ceil(min(span, plan.T_cap) - 1e-12)), span, span > plan.T_cap

    def cell(N):
        grid = _scale_grid(plan, N)
        dt = 1.0 / (plan.cadence * N * N)
        u0 = annulus_data(grid, N, plan.seed, plan.phases)
        unit = free_lq_norms(u0, betas, qs, plan.windows, dt)
        out = {"unit": [], "long": []}
        for q in qs:
            for (a, b), v in zip(plan.windows, unit[q]):
                out["unit"].append([N, q, a, b, v])
        if plan.long_window:
            n_units = {q: long_units(N, q) for q in qs}
            most = max(u for u, _, _ in n_units.values())
            if most:
                wins = [(float(m), float(m + 1)) for m in range(most)]
                per = free_lq_norms(u0, betas, [q for q in qs if n_units[q][0]], wins, dt)
                for q, vals in per.items():
                    n, span, trunc = n_units[q]
                    out["long"].append([N, q, span, n, float(sum(vals[:n])), trunc])
        if plan.cuboid_heights:
            for h in plan.cuboid_heights:
                box = Box.centered((N, N, h))
                f = box_data(grid, box, plan.seed, plan.phases)
                vals = free_lq_norms(f, betas, qs, [plan.windows[0]], dt)
                for q in qs:
                    out.setdefault("cuboid", []).append([N, h, q, vals[q][0]])
        return out

    results = map_cells(cell, list(plan.scales), jobs)
    unit = [r for res in results for r in res["unit"]]
    long = [r for res in results for r in res["long"]]
    cub = [r for res in results for r in res.get("cuboid", [])]
    art.tables["unit_windows"] = Table(["N", "q", "t1", "t2", "norm"], unit)
    if plan.long_window:
        art.tables["long_window"] = Table(["N", "q", "span", "unit_windows", "sum_norm", "truncated"], long)
        if any(r[5] for r in long):
            art.flags.append("long_window_truncated")

    for q in qs:
        for a, b in plan.windows:
            pts = [(r[0], r[4]) for r in unit if r[1] == q and r[2] == a and r[3] == b]
            art.fits.append(_fit_entry("unit", pts, q=q, window=[a, b], reference=float(strichartz_exponent(q))))
        if plan.long_window:
            pts = [(r[0], r[4]) for r in long if r[1] == q]
            if pts:
                art.fits.append(_fit_entry("long", pts, q=q, reference=None))

    if cub:
        rows = []
        for N, h, q, v in cub:
            cube = next((r[3] for r in cub if r[0] == N and r[1] == N and r[2] == q), None)
            ratio = v / cube if cube else float("nan")
            rows.append([N, h, q, v, ratio, (h / N) ** float(cuboid_exponent(q))])
        art.tables["cuboid"] = Table(["N", "height", "q", "norm", "ratio_to_cube", "reference_ratio"], rows)
        for N in plan.scales:
            for q in qs:
                pts = [(r[1] / N, r[3]) for r in rows if r[0] == N and r[2] == q]
                art.fits.append(_fit_entry("cuboid", pts, q=q, N=N, reference=float(cuboid_exponent(q))))
    art.elapsed = time.perf_counter() - t0
    return art


def _fit_entry(kind, pts, reference, **extra) -> dict:
    entry = {"fit": kind, **extra, "scales": [x for x, _ in pts], "reference": reference}
    if len(pts) >= 3 or (len(pts) == 2 and kind == "cuboid"):
        if len(pts) == 2:
            (x0, y0), (x1, y1) = pts
            slope = math.log(y1 / y0) / math.log(x1 / x0)
            entry.update(slope=slope, intercept=math.log(y0) - slope * math.log(x0), residual=0.0)
        else:
            slope, icpt, res = fit_power_law(pts)
            entry.update(slope=slope, intercept=icpt, residual=res)
    else:
        entry.update(slope=None, intercept=None, residual=None)
    return entry


def resonance_tori(plan: ExperimentPlan) -> list[tuple[str, TorusSpec]]:
    tori = [("rational", TorusSpec((1.0, 1.0, 1.0)))]
    if plan.lengths is not None or plan.torus_seed is not None:
        tori.append(("plan", plan.torus))
    lo, hi = plan.generic_range
    for i in range(plan.n_generic):
        tori.append((f"generic-{i:03d}", sample_generic_torus(plan.seed + i, lo, hi)))
    return tori


def run_resonance_count(plan: ExperimentPlan, jobs: int = 1) -> RunArtifact:
    t0 = time.perf_counter()
    ex = exponents(plan.p)
    g0, g1 = float(ex.gamma0), float(ex.gamma1)
    tori = resonance_tori(plan)
    cells = [(label, torus, K) for label, torus in tori for K in plan.K]

    def cell(c):
        label, torus, K = c
        try:
            n = resonant_lattice_count(torus.betas, ResonanceQuery(K, g0, g1, plan.c), budget=plan.budget)
            return [label, *torus.betas, K, n, False]
        except BudgetExceededError:
            return [label, *torus.betas, K, -1, True]

    rows = map_cells(cell, cells, jobs)
    art = RunArtifact(plan)
    art.tables["resonance"] = Table(["torus", "beta1", "beta2", "beta3", "K", "count", "budget_exceeded"], rows)
    per_k = {}
    for K in plan.K:
        rat = next(None if r[6] else r[5] for r in rows if r[0] == "rational" and r[4] == K)
        gen = [r[5] for r in rows if r[0].startswith("generic") and r[4] == K and not r[6]]
        med = statistics.median(gen) if gen else None
        per_k[str(K)] = {
            "rational": rat,
            "generic_median": med,
            "ratio": (rat / med) if med and rat is not None else None,
            "rational_exceeds_median": (med is not None and rat is not None and rat > med),
        }
    art.summary.update(gamma0=g0, gamma1=g1, c=plan.c, by_K=per_k)
    if any(r[6] for r in rows):
        art.flags.append("budget_exceeded")
    art.elapsed = time.perf_counter() - t0
    return art


def run_diophantine_check(plan: ExperimentPlan, jobs: int = 1) -> RunArtifact:
    t0 = time.perf_counter()
    betas = plan.torus.betas
    margin, witness = diophantine_margin(betas, plan.n_max)
    rational = margin <= RATIONAL_TOL
    art = RunArtifact(plan)
    art.tables["diophantine"] = Table(
        ["beta1", "beta2", "beta3", "n_max", "margin", "w1", "w2", "w3", "rational"],
        [[*betas, plan.n_max, margin, *witness, rational]],
    )
    art.summary.update(betas=list(betas), n_max=plan.n_max, margin=margin, witness=list(witness), rational=rational)
    art.elapsed = time.perf_counter() - t0
    return art


RUNNERS = {
    "simulate": run_simulate,
    "growth": run_growth,
    "increment-scan": run_increment_scan,
    "strichartz-scan": run_strichartz_scan,
    "resonance-count": run_resonance_count,
    "diophantine-check": run_diophantine_check,
}


def run_plan(plan: ExperimentPlan, jobs: Optional[int] = None) -> RunArtifact:
    return RUNNERS[plan.kind](plan, resolve_jobs(jobs))
