"""Iteration traces shared by every solver.

A trace stores one record per outer iteration (n = 0 is the initial
configuration), optional fractional records keyed by (n, j) for in-sweep
states, and a final status string: "converged", "max-iters" or "diverged".
"""

import json

import numpy as np


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


class Trace:
    def __init__(self, algorithm, meta=None):
        self.algorithm = algorithm
        self.meta = dict(meta or {})
        self.records = []
        self.fractional = {}
        self.status = "max-iters"

    def add(self, **fields):
        """Append the record for the next outer iteration."""
        rec = {"iter": len(self.records)}
        rec.update(fields)
        self.records.append(rec)
        return rec

    def add_fractional(self, n, j, **fields):
        self.fractional[(n, j)] = dict(fields)

    def __len__(self):
        return len(self.records)

    def last(self, key):
        return self.records[-1][key]

    def series(self, key):
        return [r[key] for r in self.records]

    def write_jsonl(self, fh):
        """One JSON object per outer iteration: iter, time_s, objective, residuals."""
        for r in self.records:
            out = {
                "iter": r["iter"],
                "time_s": float(r.get("time_s", 0.0)),
                "objective": _jsonable(r.get("objective")),
                "residuals": _jsonable(r.get("residuals", {})),
            }
            fh.write(json.dumps(out, sort_keys=True) + "\n")
