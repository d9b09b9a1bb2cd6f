"""Container for metric evaluation results with config echo."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MetricReport:
    """Named scalar results, optional per-seed raw arrays, and the config used.

    Scalars for nonnegative metrics are validated at insertion time; raw
    arrays are kept for plotting and written as CSV alongside the JSON.
    """

    config: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)

    def add_scalar(self, name: str, value: float, nonnegative: bool = True) -> None:
        value = float(value)
        if not np.isfinite(value):
            raise ValueError(f"metric {name!r} is not finite: {value}")
        if nonnegative and value < -1e-12:
            raise ValueError(f"metric {name!r} should be nonnegative, got {value}")
        self.scalars[name] = value

    def add_array(self, name: str, values) -> None:
        self.arrays[name] = np.asarray(values, dtype=float)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "scalars": self.scalars,
            "arrays": {k: list(map(float, v)) for k, v in self.arrays.items()},
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def save_arrays_csv(self, path) -> None:
        """Raw per-seed values in long format: name, index, value."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "index", "value"])
            for name in sorted(self.arrays):
                for i, v in enumerate(self.arrays[name]):
                    writer.writerow([name, i, repr(float(v))])

    @classmethod
    def load_json(cls, path) -> "MetricReport":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        rep = cls(config=d.get("config", {}), scalars=d.get("scalars", {}))
        for k, v in d.get("arrays", {}).items():
            rep.add_array(k, v)
        return rep


__all__ = ["MetricReport"]
