"""Per-replica samples of one labelled quantity, and their CSV schema.

Both simulated fluctuations and exact draws from the Gaussian limit are
stored as ``p,t,replica,value`` rows so the same diagnostics run on either.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import PairingError


@dataclass(frozen=True)
class Observable:
    p: int
    t: float
    values: np.ndarray = field(repr=False)
    source: tuple = ()
    n: int | None = None
    seed: int | None = None

    @property
    def label(self):
        return (self.p, self.t)

    @property
    def replicas(self):
        return len(self.values)


def check_paired(observables):
    """Raise unless all observables share one source and replica count."""
    observables = list(observables)
    if not observables:
        raise ValueError("need at least one observable")
    first = observables[0]
    for obs in observables[1:]:
        if obs.replicas != first.replicas:
            raise PairingError(
                f"replica counts differ: {first.replicas} vs {obs.replicas}")
        if obs.source != first.source:
            raise PairingError(
                f"observables {first.label} and {obs.label} come from different ensembles")
    return observables


def timestamp_line():
    return "# generated " + datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_observables_csv(path, observables, meta, header=True):
    """Write ``p,t,replica,value`` rows preceded by ``# meta {json}``.

    ``header=False`` drops the timestamp line so reruns are byte-identical.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        if header:
            fh.write(timestamp_line() + "\n")
        fh.write("# meta " + json.dumps(meta, sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["p", "t", "replica", "value"])
        for obs in observables:
            for r, v in enumerate(obs.values):
                writer.writerow([obs.p, repr(obs.t), r, repr(float(v))])


def read_observables_csv(path):
    """Inverse of :func:`write_observables_csv`; returns ``(meta, observables)``."""
    meta, rows = {}, {}
    with Path(path).open(newline="") as fh:
        lines = [line for line in fh]
    body = []
    for line in lines:
        if line.startswith("# meta "):
            meta = json.loads(line[len("# meta "):])
        elif not line.startswith("#"):
            body.append(line)
    for row in csv.DictReader(body):
        key = (int(row["p"]), float(row["t"]))
        rows.setdefault(key, []).append((int(row["replica"]), float(row["value"])))
    source = ("csv", str(path))
    observables = []
    for (p, t), items in rows.items():
        items.sort()
        observables.append(Observable(p=p, t=t, values=np.array([v for _, v in items]),
                                      source=source, n=meta.get("n"), seed=meta.get("seed")))
    return meta, observables
