"""Experiment configuration files and the CSV rows they produce."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..catalog import catalog_get, load_operator
from ..operators import Operator
from .experiments import (
    PreconditionError,
    boundary_fraction,
    blowup_family,
    circulation_ratio,
    circulation_suite,
    divfree_witness_growth,
    duality_ratio,
    fractional_ratio,
    hardy_ratio,
    p2_sharp_check,
    sobolev_ratio,
    square_curve,
)
from .fields import bump, bump_family, divfree_field, random_bump
from .grid import TorusGrid

__all__ = [
    "ExperimentConfig",
    "ExperimentRow",
    "CSV_HEADER",
    "KINDS",
    "run_experiment",
    "rows_to_csv",
    "load_config",
    "duality_suite",
]

CSV_HEADER = ("experiment", "operator", "N", "epsilon", "ell", "p", "sigma", "ratio",
              "refinement_delta", "seed")
KINDS = ("sobolev", "hardy", "fractional", "p2", "blowup", "duality", "divfree-growth", "circulation")
SUPPORT_TOL = 1e-8


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment run.

    ``family`` selects the test fields: ``bump`` (ten fixed bumps and blobs),
    ``blowup`` (mollified delta solutions at each ``epsilons`` scale) or
    ``smooth`` (a single wide bump, the default for fractional runs).
    """

    operator: str = "catalog:grad:n=2"
    grids: tuple = (64,)
    epsilons: tuple = ()
    family: str = "bump"
    ell: int = 0
    p: float | None = None
    sigma: float | None = None
    target: str = "sobolev"
    witness: tuple | None = None
    trials: int = 20
    seed: int = 0
    output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "grids", tuple(int(g) for g in self.grids))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if self.witness is not None:
            object.__setattr__(self, "witness", tuple(float(w) for w in self.witness))
        if not self.grids:
            raise PreconditionError("grids", "at least one grid size is required")
        for size in self.grids:
            if size < 8 or size % 2:
                raise PreconditionError("grids", f"grid size must be even and >= 8, got {size}")
        finest = 1.0 / max(self.grids)
        for eps in self.epsilons:
            if eps < 2 * finest:
                raise PreconditionError("resolvable", f"epsilon {eps} < 2h = {2 * finest} on the finest grid")
        if self.family not in ("bump", "blowup", "smooth"):
            raise PreconditionError("family", f"unknown family {self.family!r}")
        if self.trials < 1:
            raise PreconditionError("trials", "trials must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise PreconditionError("config_keys", f"unknown keys {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grids"] = list(self.grids)
        d["epsilons"] = list(self.epsilons)
        d["witness"] = None if self.witness is None else list(self.witness)
        return d


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PreconditionError("config_syntax", str(exc)) from None
    if not isinstance(doc, dict):
        raise PreconditionError("config_syntax", "config must be a JSON object")
    return ExperimentConfig.from_dict(doc)


@dataclass
class ExperimentRow:
    experiment: str
    operator: str
    N: int
    epsilon: float | None
    ell: int | None
    p: float | None
    sigma: float | None
    ratio: float
    refinement_delta: float = math.nan
    seed: int = 0


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(getattr(r, k)) for k in CSV_HEADER])
    return buf.getvalue()


def _fill_refinement(rows: list[ExperimentRow], grids) -> None:
    """Relative change against the same experiment on the next coarser grid."""
    by_key = {(r.experiment, r.epsilon, r.N): r for r in rows}
    order = sorted(set(grids))
    for r in rows:
        i = order.index(r.N)
        if i == 0:
            continue
        prev = by_key.get((r.experiment, r.epsilon, order[i - 1]))
        if prev is not None and r.ratio != 0 and np.isfinite(r.ratio):
            r.refinement_delta = abs(r.ratio - prev.ratio) / abs(r.ratio)


def _witness(cfg: ExperimentConfig, op: Operator) -> np.ndarray:
    if cfg.witness is None:
        e = np.zeros(op.dim_e)
        e[0] = 1.0
        return e
    if len(cfg.witness) != op.dim_e:
        raise PreconditionError("witness", f"witness must have length {op.dim_e}")
    return np.asarray(cfg.witness)


def _fields(cfg: ExperimentConfig, op: Operator, grid: TorusGrid):
    vec = None if cfg.witness is None or len(cfg.witness) != op.dim_v else cfg.witness
    if cfg.family == "smooth":
        dim_vec = np.ones(op.dim_v) / np.sqrt(op.dim_v) if vec is None else vec
        members = [("smooth", bump(grid, grid.center, 0.24, dim_vec, power=2.0))]
    else:
        members = bump_family(grid, op.dim_v, vec)
    for name, u in members:
        frac = boundary_fraction(u)
        if frac > SUPPORT_TOL:
            raise PreconditionError("support", f"{name} leaks {frac:.2e} of its mass to the boundary band")
    return members


def _estimate_rows(kind, cfg, op):
    fn = {"sobolev": sobolev_ratio, "hardy": hardy_ratio}[kind]
    rows = []
    for size in cfg.grids:
        grid = TorusGrid(op.n, size)
        if cfg.family == "blowup":
            for row in blowup_family(op, _witness(cfg, op), [e for e in cfg.epsilons if e >= 2 / size],
                                     cfg.ell, kind, size):
                rows.append(ExperimentRow(f"{kind}/blowup", cfg.operator, size, row.epsilon, cfg.ell,
                                          None, None, row.ratio, seed=cfg.seed))
        else:
            for name, u in _fields(cfg, op, grid):
                rows.append(ExperimentRow(f"{kind}/{name}", cfg.operator, size, None, cfg.ell,
                                          None, None, fn(op, u, cfg.ell), seed=cfg.seed))
    return rows


def _fractional_rows(cfg, op):
    if cfg.p is None or cfg.sigma is None:
        raise PreconditionError("exponent_range", "fractional runs need p and sigma")
    if cfg.family == "blowup":
        raise PreconditionError("family", "fractional runs take the bump or smooth family")
    rows = []
    for size in cfg.grids:
        grid = TorusGrid(op.n, size)
        for name, u in _fields(cfg, op, grid):
            r = fractional_ratio(op, u, cfg.ell, cfg.sigma, cfg.p)
            rows.append(ExperimentRow(f"fractional/{name}", cfg.operator, size, None, cfg.ell,
                                      cfg.p, cfg.sigma, r, seed=cfg.seed))
    return rows


def _p2_rows(cfg, op):
    rows = []
    for size in cfg.grids:
        measured, bound = p2_sharp_check(op, cfg.trials, cfg.seed, size)
        rows.append(ExperimentRow("p2/measured", cfg.operator, size, None, None, 2.0, None,
                                  measured, seed=cfg.seed))
        rows.append(ExperimentRow("p2/bound", cfg.operator, size, None, None, 2.0, None,
                                  bound, seed=cfg.seed))
    return rows


def _blowup_rows(cfg, op):
    rows = []
    e = _witness(cfg, op)
    for size in cfg.grids:
        for row in blowup_family(op, e, [x for x in cfg.epsilons if x >= 2 / size],
                                 cfg.ell, cfg.target, size):
            rows.append(ExperimentRow(f"blowup/{cfg.target}", cfg.operator, size, row.epsilon,
                                      cfg.ell, None, None, row.ratio, seed=cfg.seed))
            rows.append(ExperimentRow(f"blowup/{cfg.target}/source_perturbation", cfg.operator, size,
                                      row.epsilon, cfg.ell, None, None, row.source_perturbation,
                                      seed=cfg.seed))
    return rows


def duality_suite(grid: TorusGrid, trials: int, seed: int, kmax: int = 4):
    """``(f, phi)`` pairs: divergence-free trigonometric ``f``, random bump ``phi``."""
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 3, t]))
        yield divfree_field(grid, kmax, rng), random_bump(grid, rng, 2)


def _duality_rows(cfg, op):
    if op.n != 2 or op.dim_v != 2:
        raise PreconditionError("operator", "duality suite uses divergence-free fields in n=2")
    ell = cfg.ell if cfg.ell else 1
    rows = []
    for size in cfg.grids:
        grid = TorusGrid(2, size)
        worst = max(duality_ratio(op, f, phi, ell) for f, phi in duality_suite(grid, cfg.trials, cfg.seed))
        rows.append(ExperimentRow("duality/max", cfg.operator, size, None, ell, None, None,
                                  worst, seed=cfg.seed))
    return rows


def _growth_rows(cfg, op):
    rows = []
    for size in cfg.grids:
        grid = TorusGrid(2, size)
        eps = [e for e in cfg.epsilons if e >= 2 / size]
        for e, r in divfree_witness_growth(eps, grid):
            rows.append(ExperimentRow("divfree-growth", "catalog:partial_slice:n=2", size, e, 1,
                                      None, None, r, seed=cfg.seed))
    return rows


def _circulation_rows(cfg, op):
    eps = cfg.epsilons[0] if cfg.epsilons else 1.0 / 16
    curve = square_curve()
    rows = []
    for size in cfg.grids:
        grid = TorusGrid(2, size)
        suite = circulation_suite(grid, curve, cfg.trials, cfg.seed)
        worst = max(circulation_ratio(curve, phi, eps) for phi in suite)
        rows.append(ExperimentRow("circulation/max", "square", size, eps, 1, 2.0, None,
                                  worst, seed=cfg.seed))
    return rows


def run_experiment(kind: str, cfg: ExperimentConfig) -> list[ExperimentRow]:
    """Run one experiment kind and return its CSV rows.

    Raises
    ------
    PreconditionError
        With ``.name`` set to the violated precondition.
    """
    if kind not in KINDS:
        raise PreconditionError("kind", f"unknown experiment {kind!r}; choose from {', '.join(KINDS)}")
    if kind in ("divfree-growth", "circulation"):
        op = catalog_get("partial_slice", 2)
    else:
        op = load_operator(cfg.operator)
    runner = {
        "sobolev": lambda: _estimate_rows("sobolev", cfg, op),
        "hardy": lambda: _estimate_rows("hardy", cfg, op),
        "fractional": lambda: _fractional_rows(cfg, op),
        "p2": lambda: _p2_rows(cfg, op),
        "blowup": lambda: _blowup_rows(cfg, op),
        "duality": lambda: _duality_rows(cfg, op),
        "divfree-growth": lambda: _growth_rows(cfg, op),
        "circulation": lambda: _circulation_rows(cfg, op),
    }[kind]
    rows = runner()
    _fill_refinement(rows, cfg.grids)
    return rows
