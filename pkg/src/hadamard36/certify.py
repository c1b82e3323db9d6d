"""Named checks with residuals, and aggregation of certificates into a summary table."""
from __future__ import annotations

import os
from collections import defaultdict
from pathlib import Path

import numpy as np

from .hadamard_tools import DEFAULT_Q_MAX, defect, is_chm, to_butson
from .serialization import read_certificates
from .tensor_core import BipartiteShape, is_two_unitary, unitarity_residual

CHECKS = ("unitary", "two-unitary", "chm", "butson", "symmetric")
TOL_ENV = "HADAMARD36_TOL"

# row order of the summary table
TABLE_LABELS = ("H(0)", "H(alpha)", "H(sigma)", "H(delta)", "U1", "U2", "U3", "U3(a)")
TABLE_COLUMNS = ("matrix", "defect", "Butson class", "symmetric", "2-unitary")


def default_tol() -> float:
    return float(os.environ.get(TOL_ENV, "1e-10"))


def _lattice_residual(H, q):
    x = np.angle(H) / (2 * np.pi) * q
    return float(np.abs(x - np.rint(x)).max())


def run_check(name: str, H, scale: float = 1.0, tol: float | None = None,
              q_max: int = DEFAULT_Q_MAX) -> dict:
    """Run one named check; the record always carries a numeric residual."""
    tol = default_tol() if tol is None else tol
    H = np.asarray(H)
    rec = {"name": name, "tolerance": tol}
    if name == "unitary":
        r = unitarity_residual(H, scale)
        rec.update(residual=r, passed=r <= tol, scale=scale)
    elif name == "two-unitary":
        rep = is_two_unitary(H, BipartiteShape.from_order(H.shape[0]), scale, tol)
        rec.update(residual=rep.residual, passed=rep.passed, scale=scale,
                   residual_U=rep.residual_U, residual_R=rep.residual_R,
                   residual_Gamma=rep.residual_Gamma)
    elif name == "chm":
        c = is_chm(H, tol)
        rec.update(residual=max(c.unimodularity_residual, c.orthogonality_residual),
                   passed=c.passed)
    elif name == "butson":
        bm = to_butson(H, q_max, tol=1e-8)
        if bm is not None:
            rec.update(residual=_lattice_residual(H, bm.q), passed=True, q=bm.q)
        else:
            best = min(_lattice_residual(H, q) for q in range(2, q_max + 1))
            unimod = float(np.abs(np.abs(H) - 1).max())
            rec.update(residual=max(best, unimod), passed=False, q=None)
        rec["tolerance"] = 1e-8
    elif name == "symmetric":
        r = float(np.abs(H - H.T).max())
        rec.update(residual=r, passed=r <= tol)
    else:
        raise ValueError(f"unknown check {name!r}; choose from {CHECKS}")
    rec["passed"] = bool(rec["passed"])
    return rec


def defect_check(H) -> dict:
    rep = defect(H)
    gap = rep.gap_ratio if np.isfinite(rep.gap_ratio) else None
    return {"name": "defect", "tolerance": None, "passed": rep.defect is not None,
            "residual": 1.0 / rep.gap_ratio, "gap_ratio": gap,
            "value": rep.defect, "nullity": rep.nullity}


def collect(directory) -> dict[str, dict[str, list[dict]]]:
    """``label -> check name -> [latest record per subject]``."""
    latest = {}
    for path in sorted(Path(directory).glob("*.jsonl")):
        for cert in read_certificates(path):
            subj = cert["subject"]
            label = subj.get("label") or subj.get("path") or subj["sha256"][:12]
            for chk in cert["checks"]:
                latest[(label, subj["sha256"], chk["name"])] = {**chk, "n": subj.get("n")}
    table: dict[str, dict[str, list[dict]]] = defaultdict(lambda: defaultdict(list))
    for (label, _, name), chk in sorted(latest.items(), key=lambda kv: kv[0]):
        table[label][name].append(chk)
    return table


def _defect_cell(recs):
    if not recs:
        return "not run"
    vals = sorted({r["value"] for r in recs if r.get("value") is not None})
    if not vals:
        return "indeterminate"
    return str(vals[0]) if len(vals) == 1 else "{" + ", ".join(map(str, vals)) + "}"


def _bool_cell(recs, yes, no):
    if not recs:
        return "not run"
    vals = {r["passed"] for r in recs}
    return yes if vals == {True} else no if vals == {False} else "mixed"


def _butson_cell(recs, n):
    if not recs:
        return "not run"
    qs = {r.get("q") if r["passed"] else None for r in recs}
    if qs == {None}:
        return "-"
    if None in qs:
        return "mixed"
    return ", ".join(f"BH({n},{q})" for q in sorted(qs))


def summary_rows(directory) -> list[tuple[str, ...]]:
    table = collect(directory)
    if not table:
        return []
    labels = list(TABLE_LABELS) + sorted(set(table) - set(TABLE_LABELS))
    rows = []
    for label in labels:
        checks = table.get(label, {})
        n = next((r.get("n") for recs in checks.values() for r in recs if r.get("n")), 36)
        rows.append((
            label,
            _defect_cell(checks.get("defect", [])),
            _butson_cell(checks.get("butson", []), n),
            _bool_cell(checks.get("symmetric", []), "M = M^T", "-"),
            _bool_cell(checks.get("two-unitary", []), "yes", "no"),
        ))
    return rows


def format_table(rows) -> str:
    cells = [TABLE_COLUMNS] + list(rows)
    widths = [max(len(r[i]) for r in cells) for i in range(len(TABLE_COLUMNS))]
    lines = [" | ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines)
