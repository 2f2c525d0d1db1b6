"""Check records and their JSON / CSV serialization."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        try:
            v = v.item()
        except (ValueError, AttributeError):
            v = v.tolist()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


@dataclass
class Check:
    """One asserted (tolerance set) or reported (tolerance None) quantity."""

    id: str
    residual: float
    tolerance: float | None
    params: dict = field(default_factory=dict)

    @property
    def passed(self):
        if self.tolerance is None:
            return True
        return bool(math.isfinite(self.residual) and self.residual < self.tolerance)

    def as_dict(self):
        return _clean({"id": self.id, "params": self.params, "residual": float(self.residual),
                       "tolerance": self.tolerance, "pass": self.passed})

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        tol = "report" if self.tolerance is None else f"< {self.tolerance:.1e}"
        return f"[{tag}] {self.id}: {self.residual:.3e} ({tol})"


def all_passed(checks):
    return all(c.passed for c in checks)


def write_report(checks, out_dir, name, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    doc = {"command": name, "pass": all_passed(checks), "checks": [c.as_dict() for c in checks]}
    if extra:
        doc["extra"] = _clean(extra)
    path = os.path.join(out_dir, f"{name}.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    return path
