"""CSV and manifest formats.

All CSVs use a header row, ``.`` as decimal separator and LF line endings.

* histogram: ``n,probability`` sorted by ``n``
* exact marginal: ``n,p_num,p_den,p_decimal``
* trajectory: ``t,n,probability`` (long format)
* trajectory summary: ``t,l2_to_equilibrium,debt,mass_defect``
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import platform
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import __version__
from .errors import ExchangeLabError
from .model import WealthDistribution


class CsvFormatError(ExchangeLabError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def write_rows(path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_histogram(path, p: WealthDistribution | Mapping[int, float], drop_zeros: bool = True) -> None:
    items = p.as_dict(drop_zeros).items() if isinstance(p, WealthDistribution) else sorted(p.items())
    write_rows(path, ["n", "probability"], ((n, _fmt(v)) for n, v in sorted(items)))


def read_histogram(path) -> WealthDistribution:
    """Parse a histogram CSV (``probability`` or ``p_decimal`` column)."""
    mapping: dict[int, float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: line 1: empty file") from None
        header = [h.strip() for h in header]
        if "n" not in header or not ({"probability", "p_decimal"} & set(header)):
            raise CsvFormatError(f"{path}: line 1: expected columns n and probability, got {header}")
        i_n = header.index("n")
        i_p = header.index("probability") if "probability" in header else header.index("p_decimal")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                n = int(row[i_n])
                v = float(row[i_p])
            except (ValueError, IndexError):
                raise CsvFormatError(f"{path}: line {lineno}: cannot parse {','.join(row)!r}") from None
            if n in mapping:
                raise CsvFormatError(f"{path}: line {lineno}: duplicate n={n}")
            mapping[n] = v
    if not mapping:
        raise CsvFormatError(f"{path}: no data rows")
    return WealthDistribution.from_mapping(mapping)


def decimal_string(q: Fraction, digits: int = 20) -> str:
    with localcontext() as ctx:
        ctx.prec = digits
        return str(Decimal(q.numerator) / Decimal(q.denominator))


def write_exact_marginal(path, table: Mapping[int, Fraction]) -> None:
    write_rows(path, ["n", "p_num", "p_den", "p_decimal"],
               ((n, q.numerator, q.denominator, decimal_string(q)) for n, q in sorted(table.items())))


def write_trajectory(path, times, snapshots) -> None:
    def rows():
        for t, p in zip(times, snapshots):
            for n, v in zip(p.ns, p.probs):
                yield _fmt(t), int(n), _fmt(v)
    write_rows(path, ["t", "n", "probability"], rows())


def manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".manifest.json")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def build_manifest(command: str, argv, params: Mapping, **derived) -> dict:
    from .agent_sim import GENERATOR
    return {
        "command": command,
        "argv": list(argv),
        "params": dict(params),
        "tool": "exchange_lab",
        "tool_version": __version__,
        "generator": f"{GENERATOR} (numpy {np.__version__})",
        "python": platform.python_version(),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "derived": derived,
    }


def write_json(path, doc: Mapping) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def read_config(path) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CsvFormatError(f"{path}: line {lineno}: expected key=value")
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out
