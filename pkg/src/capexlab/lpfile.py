"""Line-oriented LP text export in the common CPLEX-LP dialect, and a reader for it.

Rows and columns are written in index order, coefficients with ``repr``,
so identical instances produce identical files and a read restores them.
"""

from __future__ import annotations

import io
import re
from pathlib import Path

import numpy as np

from .lp import EQ, GE, LE, LPInstance

_BAD = re.compile(r"[^A-Za-z0-9_.()]")
_SENSE_OUT = {LE: "<=", GE: ">=", EQ: "="}
_SENSE_IN = {"<=": LE, "=<": LE, "<": LE, ">=": GE, "=>": GE, ">": GE, "=": EQ}
PER_LINE = 6


def _names(raw, prefix: str, n: int) -> list[str]:
    out, seen = [], set()
    for i in range(n):
        base = _BAD.sub("_", raw[i]) if raw and raw[i] else f"{prefix}{i}"
        if base[0].isdigit() or base[0] in ".":
            base = f"{prefix}_{base}"
        name, k = base, 1
        while name in seen:
            name, k = f"{base}~{k}", k + 1
        seen.add(name)
        out.append(name)
    return out


def _num(v: float) -> str:
    return repr(float(v))


def _terms(pairs) -> list[str]:
    chunks = []
    for j_name, v in pairs:
        sign = "-" if v < 0 else "+"
        chunks.append(f"{sign} {_num(abs(v))} {j_name}")
    return chunks


def _wrap(head: str, chunks: list[str], tail: str = "") -> str:
    lines = []
    for k in range(0, max(len(chunks), 1), PER_LINE):
        part = " ".join(chunks[k:k + PER_LINE])
        lines.append((head if k == 0 else "   ") + part)
    if tail:
        lines[-1] = lines[-1] + tail
    return "\n".join(lines)


def write_lp(lp: LPInstance, target=None) -> str:
    """Serialize ``lp``; writes to ``target`` (path or stream) if given, returns the text."""
    cols = _names(lp.col_names, "x", lp.n_cols)
    rows = _names(lp.row_names, "c", lp.n_rows)
    buf = io.StringIO()
    buf.write("\\ capexlab LP export\n")
    buf.write(f"\\ {lp.n_cols} columns, {lp.n_rows} rows\n")
    buf.write("Minimize\n")
    # every column appears in the objective, zeros included, to fix column order
    obj = [(cols[j], v) for j, v in enumerate(lp.c)]
    buf.write(_wrap(" obj: ", _terms(obj)) + "\n")
    buf.write("Subject To\n")
    A = lp.matrix().tocsr()
    A.sort_indices()
    for i in range(lp.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        pairs = [(cols[j], v) for j, v in zip(A.indices[lo:hi], A.data[lo:hi]) if v != 0]
        if not pairs:
            pairs = [(cols[0], 0.0)]
        tail = f" {_SENSE_OUT[lp.senses[i]]} {_num(lp.b[i])}"
        buf.write(_wrap(f" {rows[i]}: ", _terms(pairs), tail) + "\n")
    buf.write("Bounds\n")
    for j in range(lp.n_cols):
        lb, ub = lp.lb[j], lp.ub[j]
        if lb == 0 and ub == np.inf:
            continue
        if lb == -np.inf and ub == np.inf:
            buf.write(f" {cols[j]} free\n")
        elif lb == ub:
            buf.write(f" {cols[j]} = {_num(lb)}\n")
        else:
            lo_s = "-inf" if lb == -np.inf else _num(lb)
            hi_s = "+inf" if ub == np.inf else _num(ub)
            buf.write(f" {lo_s} <= {cols[j]} <= {hi_s}\n")
    buf.write("End\n")
    text = buf.getvalue()
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    elif target is not None:
        target.write(text)
    return text


def _parse_expr(tokens: list[str], index: dict[str, int], order: list[str]) -> dict[int, float]:
    out: dict[int, float] = {}
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        if tok not in index:
            index[tok] = len(order)
            order.append(tok)
        j = index[tok]
        out[j] = out.get(j, 0.0) + sign * (1.0 if coef is None else coef)
        sign, coef = 1.0, None
    return out


def read_lp(source) -> LPInstance:
    """Parse text produced by :func:`write_lp` (or a path to such a file)."""
    text = Path(source).read_text() if isinstance(source, Path) or (
        isinstance(source, str) and "\n" not in source and Path(source).exists()
    ) else str(source)
    section, stmt = None, []
    statements: dict[str, list[str]] = {"obj": [], "rows": [], "bounds": []}
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "end"):
            if stmt:
                statements[section].append(" ".join(stmt))
                stmt = []
            section = {"minimize": "obj", "subject to": "rows", "bounds": "bounds", "end": None}[low]
            continue
        if section == "bounds":
            statements["bounds"].append(line)
        elif section in ("obj", "rows"):
            if raw.startswith("   ") and stmt:
                stmt.append(line)
            else:
                if stmt:
                    statements[section].append(" ".join(stmt))
                stmt = [line]
    if stmt and section:
        statements[section].append(" ".join(stmt))

    index: dict[str, int] = {}
    order: list[str] = []
    c_terms: dict[int, float] = {}
    for s in statements["obj"]:
        body = s.split(":", 1)[1] if ":" in s else s
        c_terms.update(_parse_expr(body.split(), index, order))
    rows, cols, vals, senses, b, row_names = [], [], [], [], [], []
    for i, s in enumerate(statements["rows"]):
        name, body = s.split(":", 1)
        tokens = body.split()
        k = next(p for p, tk in enumerate(tokens) if tk in _SENSE_IN)
        expr = _parse_expr(tokens[:k], index, order)
        for j, v in expr.items():
            rows.append(i)
            cols.append(j)
            vals.append(v)
        senses.append(_SENSE_IN[tokens[k]])
        b.append(float(tokens[k + 1]))
        row_names.append(name.strip())
    bounds = {}
    for s in statements["bounds"]:
        tokens = s.split()
        if len(tokens) == 2 and tokens[1].lower() == "free":
            bounds[tokens[0]] = (-np.inf, np.inf)
        elif len(tokens) == 3 and tokens[1] == "=":
            v = float(tokens[2])
            bounds[tokens[0]] = (v, v)
        elif len(tokens) == 5:
            bounds[tokens[2]] = (float(tokens[0]), float(tokens[4]))
        else:
            raise ValueError(f"unsupported bound statement: {s!r}")
    n = len(order)
    c = np.zeros(n)
    for j, v in c_terms.items():
        c[j] = v
    lb, ub = np.zeros(n), np.full(n, np.inf)
    for name, (lo, hi) in bounds.items():
        if name not in index:
            raise ValueError(f"bound on undeclared column {name!r}")
        lb[index[name]], ub[index[name]] = lo, hi
    # zero-coefficient placeholders carry no entries
    keep = [k for k, v in enumerate(vals) if v != 0]
    return LPInstance(
        c=c,
        rows=np.array([rows[k] for k in keep], dtype=np.int64),
        cols=np.array([cols[k] for k in keep], dtype=np.int64),
        vals=np.array([vals[k] for k in keep], dtype=float),
        senses=senses,
        b=np.array(b, dtype=float),
        lb=lb,
        ub=ub,
        col_names=order,
        row_names=row_names,
    )
