"""Reproducible ensembles of independent standard Brownian motions.

Each replica draws from its own Philox stream keyed by
``SeedSequence(seed, spawn_key=(replica,))``. Inside a replica the
standard normals are consumed entry-major, so entry ``i`` always uses the
same contiguous block of that stream regardless of how many entries or
threads are requested. Normals come from ``Generator.standard_normal``
(ziggurat, exact for the Gaussian law).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_count, check_seed
from .errors import GridError, OrderingError


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time points starting at exactly 0."""

    times: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise GridError("time grid is empty")
        if not all(np.isfinite(times)):
            raise GridError(f"time grid has non-finite points: {times}")
        if times[0] != 0.0:
            raise GridError(f"time grid must start at 0, got {times[0]}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise GridError(f"time grid must be strictly increasing: {times}")
        object.__setattr__(self, "times", times)

    def __len__(self):
        return len(self.times)

    @property
    def array(self):
        return np.array(self.times)

    def index(self, t):
        # exact float match; fuzzy lookup would hide config mistakes
        try:
            return self.times.index(float(t))
        except ValueError:
            raise GridError(f"time {t!r} is not a point of the grid {self.times}") from None


@dataclass(frozen=True)
class PathEnsemble:
    """Brownian paths indexed as ``values[replica, entry, grid_index]``."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)
    seed: int

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def replicas(self):
        return self.values.shape[0]

    @property
    def n_entries(self):
        return self.values.shape[1]

    def at(self, t):
        """Entries b_i(t) for every replica, shape ``(replicas, n_entries)``."""
        return self.values[:, :, self.grid.index(t)]

    def fingerprint(self):
        return ("brownian", self.n_entries, self.replicas, self.seed, self.grid.times)


@dataclass(frozen=True)
class IncrementPair:
    """``u = b(t1)`` and ``v = b(t2) - b(t1)``; arrays may carry a replica axis."""

    u: np.ndarray
    v: np.ndarray
    t1: float
    t2: float


def replica_generator(seed, replica):
    ss = np.random.SeedSequence(seed, spawn_key=(replica,))
    return np.random.Generator(np.random.Philox(ss))


def _fill(values, seed, scale, start, stop):
    n_entries, n_steps = values.shape[1], len(scale)
    for r in range(start, stop):
        z = replica_generator(seed, r).standard_normal((n_entries, n_steps))
        np.cumsum(z * scale, axis=1, out=values[r, :, 1:])


def generate_ensemble(n_entries, grid, replicas, seed, threads=1):
    """Sample ``replicas`` independent copies of ``n_entries`` Brownian paths.

    Output is bit-identical for identical arguments whatever ``threads`` is,
    because every replica owns a seed-derived stream.
    """
    n_entries = check_count(n_entries, "n_entries")
    replicas = check_count(replicas, "replicas")
    seed = check_seed(seed)
    threads = check_count(threads, "threads")
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(tuple(grid))

    values = np.zeros((replicas, n_entries, len(grid)))
    scale = np.sqrt(np.diff(grid.array))
    if len(scale):
        if threads == 1:
            _fill(values, seed, scale, 0, replicas)
        else:
            bounds = np.linspace(0, replicas, threads + 1).astype(int)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                jobs = [
                    pool.submit(_fill, values, seed, scale, a, b)
                    for a, b in zip(bounds[:-1], bounds[1:])
                    if b > a
                ]
                for job in jobs:
                    job.result()
    return PathEnsemble(grid=grid, values=values, seed=seed)


def increment_decompose(ensemble, replica, t1, t2):
    """Split b(t2) into the value at t1 and the independent increment after it.

    ``replica=None`` returns arrays over all replicas.
    """
    if float(t1) > float(t2):
        raise OrderingError(f"need t1 <= t2, got t1={t1}, t2={t2}")
    if float(t1) <= 0:
        raise GridError(f"t1 must be positive, got {t1}")
    i1, i2 = ensemble.grid.index(t1), ensemble.grid.index(t2)
    if replica is None:
        rows = ensemble.values
    else:
        if not 0 <= replica < ensemble.replicas:
            raise IndexError(f"replica {replica} out of range [0, {ensemble.replicas})")
        rows = ensemble.values[replica]
    u = rows[..., i1].copy()
    v = rows[..., i2] - u
    return IncrementPair(u=u, v=v, t1=float(t1), t2=float(t2))


# --- persistence -------------------------------------------------------------

def _metadata(ensemble):
    return {
        "n_entries": ensemble.n_entries,
        "replicas": ensemble.replicas,
        "seed": ensemble.seed,
        "times": list(ensemble.grid.times),
    }


def save_ensemble_csv(ensemble, path):
    """Write ``# meta {json}`` then rows ``replica,entry,grid_index,value``."""
    path = Path(path)
    r, e, g = np.meshgrid(
        np.arange(ensemble.replicas), np.arange(ensemble.n_entries),
        np.arange(len(ensemble.grid)), indexing="ij",
    )
    with path.open("w", newline="") as fh:
        fh.write("# meta " + json.dumps(_metadata(ensemble), sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["replica", "entry", "grid_index", "value"])
        for row in zip(r.ravel(), e.ravel(), g.ravel(), ensemble.values.ravel()):
            writer.writerow([int(row[0]), int(row[1]), int(row[2]), repr(float(row[3]))])


def load_ensemble_csv(path):
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("# meta "):
            raise ValueError(f"{path}: missing '# meta' header line")
        meta = json.loads(first[len("# meta "):])
        reader = csv.DictReader(fh)
        values = np.zeros((meta["replicas"], meta["n_entries"], len(meta["times"])))
        for row in reader:
            values[int(row["replica"]), int(row["entry"]), int(row["grid_index"])] = float(row["value"])
    return PathEnsemble(grid=TimeGrid(tuple(meta["times"])), values=values, seed=meta["seed"])


def save_ensemble_npz(ensemble, path):
    """Flat binary dump: a float64 ``values`` array plus the grid and seed."""
    np.savez(
        path,
        values=np.asarray(ensemble.values),
        times=ensemble.grid.array,
        seed=np.uint64(ensemble.seed),
    )


def load_ensemble_npz(path):
    with np.load(path) as data:
        return PathEnsemble(
            grid=TimeGrid(tuple(data["times"].tolist())),
            values=data["values"].copy(),
            seed=int(data["seed"]),
        )
