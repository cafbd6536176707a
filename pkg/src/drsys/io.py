"""CSV and JSON persistence.

Every CSV starts with ``# key=value`` comment lines recording how it was
made (model, seed, mode), followed by a header row.  Rationals are written
as ``num/den`` with a float companion column so plots can use the latter
while nothing exact is lost.
"""
from __future__ import annotations

import csv
import io as _io
import json
import sys
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

from .engine import Dist
from .model import parse_number
from .polymode import RationalPoly

# exact numerators grow past the default 4300-digit str() guard quickly
if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(0)


def fmt_exact(x: Any) -> str:
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(x).lower()
    if isinstance(x, Rational):
        x = Fraction(x)
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return repr(float(x))


def fmt_float(x: Any) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (Rational, float)):
        return fmt_exact(v)
    return str(v)


def write_table(rows: Sequence[Mapping[str, Any]], columns: Sequence[str], out: TextIO,
                meta: Mapping[str, Any] | None = None, exact_columns: Iterable[str] = ()) -> None:
    """Rows as CSV; each name in ``exact_columns`` also gets a ``<name>_float`` column."""
    paired = set(exact_columns)
    for key, value in (meta or {}).items():
        out.write(f"# {key}={value}\n")
    header = []
    for c in columns:
        header.append(c)
        if c in paired:
            header.append(f"{c}_float")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        line = []
        for c in columns:
            line.append(_cell(row.get(c)))
            if c in paired:
                line.append(fmt_float(row.get(c)))
        w.writerow(line)


def table_to_str(rows: Sequence[Mapping[str, Any]], columns: Sequence[str], **kw) -> str:
    buf = _io.StringIO()
    write_table(rows, columns, buf, **kw)
    return buf.getvalue()


def read_table(src: TextIO) -> tuple[dict[str, str], list[dict[str, str]]]:
    """(meta, rows) from a file written by :func:`write_table`."""
    meta, body = {}, []
    for line in src:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))


def dist_rows(d: Dist) -> list[dict]:
    if d.exact:
        num, den = d.numerators
        return [{"k": k, "mass_numerator": v, "mass_denominator": den,
                 "mass_float": float(Fraction(v, den))} for k, v in enumerate(num) if v]
    return [{"k": k, "mass_numerator": "", "mass_denominator": "", "mass_float": float(v)}
            for k, v in enumerate(d.masses) if v]


DIST_COLUMNS = ("k", "mass_numerator", "mass_denominator", "mass_float")


def write_dist(d: Dist, out: TextIO, **meta) -> None:
    meta = dict(meta)
    meta["lumped_tail"] = fmt_exact(d.lumped_tail)
    meta["mode"] = d.mode
    buf_rows = dist_rows(d)
    for key, value in meta.items():
        out.write(f"# {key}={value}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(DIST_COLUMNS)
    for r in buf_rows:
        w.writerow([r["k"], r["mass_numerator"], r["mass_denominator"], repr(r["mass_float"])])


def read_dist(src: TextIO) -> Dist:
    meta, rows = read_table(src)
    tail = parse_number(meta.get("lumped_tail", "0") or "0")
    if rows and rows[0]["mass_numerator"]:
        masses = {int(r["k"]): Fraction(int(r["mass_numerator"]), int(r["mass_denominator"]))
                  for r in rows}
        return Dist.from_masses(masses, Fraction(tail))
    return Dist.from_masses({int(r["k"]): float(r["mass_float"]) for r in rows}, float(tail))


def to_jsonable(x: Any) -> Any:
    if isinstance(x, RationalPoly):
        return x.to_json()
    if isinstance(x, Rational) and not isinstance(x, (bool, int)):
        return fmt_exact(x)
    if isinstance(x, Mapping):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if hasattr(x, "item"):
        return x.item()
    return x


def write_json(obj: Any, out: TextIO) -> None:
    json.dump(to_jsonable(obj), out, indent=2, sort_keys=False)
    out.write("\n")


def open_out(path: str | Path | None) -> TextIO:
    if path is None or str(path) == "-":
        return sys.stdout
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="")
