"""Machine-readable reports.

Reports are key-sorted JSON with a fixed float formatting, so a rerun with the
same inputs and seed is byte-identical.  Wall-clock timing is left out unless
explicitly requested, since it would break that property.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .classifier import (
    VALIDATION_DIRECTIONS,
    WITNESS_TOL,
    SphereSampler,
    check_cancelling,
    check_cocancelling,
    check_elliptic,
    check_weakly_cancelling,
)
from .operators import Operator, operator_to_dict
from .subspace import TolerancePolicy

__all__ = [
    "clean",
    "dumps",
    "operator_descriptor",
    "policy_echo",
    "classify",
    "classification_report",
    "compatibility_report",
    "experiment_report",
    "exit_code",
    "verdict_summary",
]


def clean(obj):
    """Plain JSON types only; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(clean(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def operator_descriptor(op: Operator, ref: str | None = None) -> dict:
    canonical = json.dumps(operator_to_dict(op), sort_keys=True, separators=(",", ":"))
    return {
        "ref": ref,
        "name": op.name,
        "n": op.n, "k": op.k, "dim_v": op.dim_v, "dim_e": op.dim_e,
        "sha256": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
    }


def policy_echo(pol: TolerancePolicy, sampler: SphereSampler | None = None, **extra) -> dict:
    doc = dict(asdict(pol))
    doc.update(witness_tol=WITNESS_TOL, validation_directions=VALIDATION_DIRECTIONS)
    if sampler is not None:
        doc["sampler"] = asdict(sampler)
    doc.update(extra)
    return doc


def _skipped(prop: str, reason: str) -> dict:
    return {"property": prop, "value": "skipped", "reason": reason}


def classify(op: Operator, sampler: SphereSampler, pol: TolerancePolicy,
             quad_points: int = 64, seed: int = 0) -> list[dict]:
    """All four verdicts as dictionaries, weak cancellation skipped when it
    is undefined (non-elliptic operator or ``n < k``)."""
    ell = check_elliptic(op, sampler, pol)
    out = [ell.to_dict(),
           check_cancelling(op, sampler, pol).to_dict(),
           check_cocancelling(op, sampler, pol).to_dict()]
    if not ell.holds:
        out.append(_skipped("weakly_cancelling", "operator is not injectively elliptic"))
    elif op.n < op.k:
        out.append(_skipped("weakly_cancelling", f"n={op.n} < k={op.k}"))
    else:
        try:
            out.append(check_weakly_cancelling(op, quad_points, seed).to_dict())
        except ValueError as exc:
            out.append(_skipped("weakly_cancelling", str(exc)))
    return out


def exit_code(verdicts: list[dict]) -> int:
    return 2 if any(v["value"] == "inconclusive" for v in verdicts) else 0


def _base(kind: str, seed: int, timing: float | None) -> dict:
    doc = {"tool": {"name": "cancelkit", "version": __version__}, "kind": kind, "seed": seed}
    if timing is not None:
        doc["timing"] = {"seconds": timing}
    return doc


def classification_report(op: Operator, ref: str | None, sampler: SphereSampler,
                          pol: TolerancePolicy, quad_points: int = 64, seed: int = 0,
                          timing: bool = False) -> dict:
    t0 = time.perf_counter()
    verdicts = classify(op, sampler, pol, quad_points, seed)
    doc = _base("classify", seed, time.perf_counter() - t0 if timing else None)
    doc.update(operator=operator_descriptor(op, ref), verdicts=verdicts,
               tolerance_policy=policy_echo(pol, sampler, quad_points=quad_points))
    return doc


def compatibility_report(op: Operator, ref: str | None, l: Operator, info, verification,
                         seed: int, pol: TolerancePolicy, timing: float | None = None) -> dict:
    doc = _base("compat", seed, timing)
    doc.update(
        operator=operator_descriptor(op, ref),
        compatibility={
            "operator": operator_descriptor(l),
            "degree": l.k,
            "zero_operator": l.is_zero,
            "interpolation": info.to_dict(),
            "verification": verification.to_dict() if verification is not None else None,
        },
        tolerance_policy=policy_echo(pol),
    )
    return doc


def experiment_report(kind: str, cfg, rows, timing: float | None = None) -> dict:
    doc = _base("experiment", cfg.seed, timing)
    doc.update(experiment=kind, config=cfg.to_dict(),
               rows=[{k: getattr(r, k) for k in r.__dataclass_fields__} for r in rows])
    return doc


def verdict_summary(verdicts) -> dict:
    """``{property: value}`` for quick inspection."""
    return {v["property"]: v["value"] for v in verdicts}

