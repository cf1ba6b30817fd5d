"""PDSTSP instances and solutions: TSPLIB ingestion, generation, JSON I/O,
validation and makespan evaluation.

Vertex 0 is the depot, vertices ``1..n`` are customers and ``n + 1`` is a
copy of the depot, so a truck tour is the path ``0 -> tour -> n + 1``.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance data."""


class TsplibError(InstanceError):
    """Raised when a TSPLIB document cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SolutionError(ValueError):
    """Raised when a solution violates the instance; ``vertex`` names the culprit."""

    def __init__(self, message: str, vertex: int | None = None):
        self.vertex = vertex
        super().__init__(message)


# ---------------------------------------------------------------------------
# TSPLIB distance conventions
# ---------------------------------------------------------------------------

def nint(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def euclidean(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def euc_2d_matrix(coords: np.ndarray) -> np.ndarray:
    return nint(euclidean(coords))


def att_raw(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2) / 10.0)


def att_matrix(coords: np.ndarray) -> np.ndarray:
    r = att_raw(coords)
    t = nint(r)
    return np.where(t < r, t + 1.0, t)


def _geo_radians(coords: np.ndarray) -> np.ndarray:
    pi = 3.141592
    deg = np.trunc(coords)
    minutes = coords - deg
    return pi * (deg + 5.0 * minutes / 3.0) / 180.0


GEO_RADIUS = 6378.388


def geo_raw(coords: np.ndarray) -> np.ndarray:
    rad = _geo_radians(coords)
    lat = rad[:, 0]
    lon = rad[:, 1]
    q1 = np.cos(lon[:, None] - lon[None, :])
    q2 = np.cos(lat[:, None] - lat[None, :])
    q3 = np.cos(lat[:, None] + lat[None, :])
    arg = np.clip(0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3), -1.0, 1.0)
    return GEO_RADIUS * np.arccos(arg)


def geo_matrix(coords: np.ndarray) -> np.ndarray:
    d = np.trunc(geo_raw(coords) + 1.0)
    np.fill_diagonal(d, 0.0)
    return d


# (rounded truck metric, unrounded straight-line metric)
METRICS = {
    "EUC_2D": (euc_2d_matrix, euclidean),
    "ATT": (att_matrix, att_raw),
    "GEO": (geo_matrix, geo_raw),
}


@dataclass(frozen=True)
class TsplibData:
    name: str
    edge_weight_type: str
    coords: np.ndarray
    comment: str = ""

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def matrix(self) -> np.ndarray:
        return METRICS[self.edge_weight_type][0](self.coords)

    def distance(self, i: int, j: int) -> float:
        """Distance between nodes given by 0-based file order."""
        pair = self.coords[[i, j]]
        return float(METRICS[self.edge_weight_type][0](pair)[0, 1])


def parse_tsplib(text: str) -> TsplibData:
    """Parse a TSPLIB document with a NODE_COORD_SECTION.

    Supports the EUC_2D, ATT and GEO edge-weight types.
    """
    header: dict[str, str] = {}
    coords: list[tuple[float, float]] = []
    lines = text.splitlines()
    in_coords = False
    dimension = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        if in_coords:
            parts = line.split()
            if re.fullmatch(r"[+-]?\d+", parts[0]):
                if len(parts) < 3:
                    raise TsplibError("coordinate line needs index, x and y", lineno)
                try:
                    coords.append((float(parts[1]), float(parts[2])))
                except ValueError:
                    raise TsplibError(f"non-numeric coordinate in {line!r}", lineno) from None
                continue
            in_coords = False
        if line.startswith("NODE_COORD_SECTION"):
            in_coords = True
            continue
        if line.endswith("_SECTION"):
            raise TsplibError(f"unsupported section {line}", lineno)
        if ":" not in line:
            raise TsplibError(f"malformed header line {line!r}", lineno)
        key, _, value = line.partition(":")
        key = key.strip().upper()
        value = value.strip()
        header[key] = value
        if key == "DIMENSION":
            try:
                dimension = int(value)
            except ValueError:
                raise TsplibError(f"DIMENSION must be an integer, got {value!r}", lineno) from None
    ewt = header.get("EDGE_WEIGHT_TYPE")
    if ewt is None:
        raise TsplibError("missing EDGE_WEIGHT_TYPE")
    if ewt not in METRICS:
        raise TsplibError(f"unsupported EDGE_WEIGHT_TYPE {ewt}")
    if not coords:
        raise TsplibError("missing NODE_COORD_SECTION")
    if dimension is not None and dimension != len(coords):
        raise TsplibError(f"DIMENSION {dimension} but {len(coords)} coordinates read")
    return TsplibData(
        name=header.get("NAME", ""),
        edge_weight_type=ewt,
        coords=np.array(coords, dtype=np.float64),
        comment=header.get("COMMENT", ""),
    )


def read_tsplib(path) -> TsplibData:
    return parse_tsplib(Path(path).read_text())


# ---------------------------------------------------------------------------
# Instance
# ---------------------------------------------------------------------------

def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Instance:
    n: int
    m: int
    truck_time: np.ndarray
    eligible: tuple[int, ...]
    drone_time: np.ndarray
    coords: np.ndarray | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.n
        if n < 1:
            raise InstanceError("an instance needs at least one customer")
        if self.m < 0:
            raise InstanceError("number of drones must be >= 0")
        t = _frozen(self.truck_time)
        if t.shape != (n + 2, n + 2):
            raise InstanceError(f"truck_time must be {(n + 2, n + 2)}, got {t.shape}")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise InstanceError("truck times must be finite and nonnegative")
        if not np.array_equal(t, t.T):
            raise InstanceError("truck_time must be symmetric")
        if not (np.array_equal(t[0, 1:n + 1], t[n + 1, 1:n + 1]) and t[0, n + 1] == 0):
            raise InstanceError("depot copy must duplicate the depot row with zero distance")
        elig = tuple(int(i) for i in self.eligible)
        if list(elig) != sorted(set(elig)) or any(i < 1 or i > n for i in elig):
            raise InstanceError("eligible must be sorted distinct customers in 1..n")
        d = _frozen(self.drone_time)
        if d.shape != (n + 2,):
            raise InstanceError(f"drone_time must have length {n + 2}")
        if not np.all(np.isfinite(d[list(elig)])) or np.any(d[list(elig)] < 0):
            raise InstanceError("drone times must be finite and nonnegative")
        object.__setattr__(self, "truck_time", t)
        object.__setattr__(self, "drone_time", d)
        object.__setattr__(self, "eligible", elig)
        if self.coords is not None:
            object.__setattr__(self, "coords", _frozen(self.coords))

    @classmethod
    def from_arrays(cls, truck_time, drone_time: dict | Sequence, eligible, m: int, **kw):
        """Build from a full (n+2)x(n+2) truck matrix and drone times keyed by
        customer (a dict) or given as a full length-(n+2) sequence."""
        t = np.asarray(truck_time, dtype=np.float64)
        n = t.shape[0] - 2
        d = np.zeros(n + 2)
        if isinstance(drone_time, dict):
            for i, v in drone_time.items():
                d[int(i)] = v
        else:
            d[:] = drone_time
        return cls(n=n, m=m, truck_time=t, eligible=tuple(sorted(eligible)), drone_time=d, **kw)

    @property
    def depot_copy(self) -> int:
        return self.n + 1

    @property
    def customers(self) -> range:
        return range(1, self.n + 1)

    @property
    def truck_only(self) -> tuple[int, ...]:
        el = set(self.eligible)
        return tuple(i for i in self.customers if i not in el)

    @property
    def effective_eligible(self) -> tuple[int, ...]:
        """Drone-eligible customers, empty when there are no drones."""
        return self.eligible if self.m > 0 else ()

    def without_drones(self) -> "Instance":
        return Instance(
            n=self.n, m=0, truck_time=self.truck_time, eligible=(),
            drone_time=np.zeros(self.n + 2), coords=self.coords, name=self.name,
            meta=dict(self.meta),
        )

    def relabel(self, perm: Sequence[int]) -> "Instance":
        """Return the instance with customer ``perm[k-1]`` renamed to ``k``."""
        order = [0] + list(perm) + [self.n + 1]
        if sorted(order) != list(range(self.n + 2)):
            raise InstanceError("perm must be a permutation of the customers")
        idx = np.array(order)
        new_of_old = {old: new for new, old in enumerate(order)}
        return Instance(
            n=self.n, m=self.m, truck_time=self.truck_time[np.ix_(idx, idx)],
            eligible=tuple(sorted(new_of_old[i] for i in self.eligible)),
            drone_time=self.drone_time[idx],
            coords=None if self.coords is None else self.coords[idx],
            name=self.name, meta=dict(self.meta),
        )

    # -- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        t = self.truck_time
        doc = {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "truck_time": [[_num(t[i, j]) for j in range(i)] for i in range(self.n + 2)],
            "eligible": list(self.eligible),
            "drone_time": [_num(self.drone_time[i]) for i in self.eligible],
        }
        if self.coords is not None:
            doc["coords"] = [[_num(x), _num(y)] for x, y in self.coords]
        if self.meta:
            doc["meta"] = self.meta
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Instance":
        try:
            n = int(doc["n"])
            m = int(doc["m"])
            rows = doc["truck_time"]
            eligible = [int(i) for i in doc["eligible"]]
            dt = doc["drone_time"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"bad instance document: {exc}") from None
        if len(rows) != n + 2 or any(len(r) != i for i, r in enumerate(rows)):
            raise InstanceError("truck_time must hold n+2 lower-triangular rows")
        if len(dt) != len(eligible):
            raise InstanceError("drone_time must be parallel to eligible")
        t = np.zeros((n + 2, n + 2))
        for i, r in enumerate(rows):
            t[i, :i] = r
        t = t + t.T
        d = np.zeros(n + 2)
        for i, v in zip(eligible, dt):
            if not 1 <= i <= n:
                raise InstanceError(f"eligible vertex {i} is not a customer")
            d[i] = float(v)
        coords = doc.get("coords")
        return cls(
            n=n, m=m, truck_time=t, eligible=tuple(sorted(eligible)), drone_time=d,
            coords=None if coords is None else np.array(coords, dtype=np.float64),
            name=doc.get("name", ""), meta=doc.get("meta", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"invalid JSON: {exc}") from None
        return cls.from_dict(doc)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Instance":
        return cls.from_json(Path(path).read_text())


def _num(v):
    v = float(v)
    return int(v) if v.is_integer() and abs(v) < 2 ** 53 else v


# ---------------------------------------------------------------------------
# Solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Solution:
    truck_tour: tuple[int, ...]
    drone_trips: tuple[tuple[int, ...], ...]
    makespan: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "truck_tour", tuple(int(i) for i in self.truck_tour))
        object.__setattr__(
            self, "drone_trips", tuple(tuple(int(i) for i in trip) for trip in self.drone_trips)
        )

    def with_makespan(self, instance: Instance) -> "Solution":
        return Solution(self.truck_tour, self.drone_trips, evaluate(instance, self))

    def to_dict(self) -> dict:
        return {
            "truck_tour": list(self.truck_tour),
            "drone_trips": [list(t) for t in self.drone_trips],
            "makespan": self.makespan,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Solution":
        try:
            return cls(
                truck_tour=doc["truck_tour"],
                drone_trips=doc["drone_trips"],
                makespan=float(doc.get("makespan", float("nan"))),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SolutionError(f"bad solution document: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "Solution":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SolutionError(f"invalid JSON: {exc}") from None


def solution_violations(instance: Instance, solution: Solution) -> list[SolutionError]:
    """Every structural problem of ``solution``; empty when it is valid."""
    problems = []
    n = instance.n
    eligible = set(instance.effective_eligible)
    if len(solution.drone_trips) != instance.m:
        problems.append(SolutionError(
            f"expected {instance.m} drone lists, got {len(solution.drone_trips)}"))
    seen: dict[int, str] = {}
    places = [("truck", solution.truck_tour)] + [
        (f"drone {k + 1}", trip) for k, trip in enumerate(solution.drone_trips)
    ]
    for where, seq in places:
        for v in seq:
            if not 1 <= v <= n:
                problems.append(SolutionError(f"vertex {v} in {where} is not a customer", v))
                continue
            if v in seen:
                problems.append(SolutionError(
                    f"customer {v} visited twice ({seen[v]} and {where})", v))
                continue
            seen[v] = where
            if where != "truck" and v not in eligible:
                kind = "truck-only" if v in instance.truck_only or instance.m == 0 else "ineligible"
                problems.append(SolutionError(f"{kind} customer {v} assigned to {where}", v))
    for v in instance.customers:
        if v not in seen:
            problems.append(SolutionError(f"customer {v} is not served", v))
    return problems


def truck_duration(instance: Instance, tour: Sequence[int]) -> float:
    if not tour:
        return 0.0
    t = instance.truck_time
    path = [0, *tour, instance.n + 1]
    return float(sum(t[a, b] for a, b in zip(path, path[1:])))


def drone_loads(instance: Instance, trips) -> list[float]:
    d = instance.drone_time
    return [float(sum(d[i] for i in trip)) for trip in trips]


def evaluate(instance: Instance, solution: Solution) -> float:
    """Makespan of a validated solution: the later of the truck's return and
    the busiest drone's total service time."""
    problems = solution_violations(instance, solution)
    if problems:
        raise problems[0]
    loads = drone_loads(instance, solution.drone_trips)
    return max([truck_duration(instance, solution.truck_tour), *loads])


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

CUSTOMER_DISTRIBUTIONS = ("random", "clustered", "random-clustered")
DEPOT_PLACEMENTS = ("center", "corner")


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of one generated instance.

    Either ``tsplib`` (a path to a seed file) or a synthetic layout of ``n``
    customers with distribution ``cd`` is used.
    """

    dp: str = "center"
    el: float = 50.0
    sp: float = 2.0
    m: int = 1
    seed: int = 0
    n: int | None = None
    cd: str = "random"
    tsplib: str | None = None
    side: float = 1000.0

    def __post_init__(self):
        if self.dp not in DEPOT_PLACEMENTS:
            raise InstanceError(f"dp must be one of {DEPOT_PLACEMENTS}")
        if not 0 <= self.el <= 100:
            raise InstanceError("el must lie in [0, 100]")
        if not self.sp > 0:
            raise InstanceError("sp must be positive")
        if self.m < 1:
            raise InstanceError("m must be at least 1")
        if self.tsplib is None:
            if self.n is None or self.n < 1:
                raise InstanceError("synthetic generation needs n >= 1")
            if self.cd not in CUSTOMER_DISTRIBUTIONS:
                raise InstanceError(f"cd must be one of {CUSTOMER_DISTRIBUTIONS}")

    @property
    def label(self) -> str:
        src = Path(self.tsplib).stem if self.tsplib else f"{self.cd}{self.n}"
        return f"{src}-{self.dp}-el{_num(self.el)}-sp{_num(self.sp)}-m{self.m}-s{self.seed}"


def _synthetic_coords(n: int, cd: str, side: float, rng: np.random.Generator) -> np.ndarray:
    def uniform(k):
        return rng.integers(0, int(side) + 1, size=(k, 2)).astype(np.float64)

    def clustered(k):
        n_centers = max(1, min(k, int(round(k / 25.0)) + 1))
        centers = rng.uniform(0.1 * side, 0.9 * side, size=(n_centers, 2))
        which = rng.integers(0, n_centers, size=k)
        pts = centers[which] + rng.normal(0.0, side / 20.0, size=(k, 2))
        return np.clip(np.round(pts), 0, side)

    if cd == "random":
        return uniform(n)
    if cd == "clustered":
        return clustered(n)
    half = n // 2
    return np.vstack([clustered(n - half), uniform(half)])


def n_eligible(el: float, n: int) -> int:
    return min(n, math.ceil(round(el * n / 100.0, 9)))


def generate(config: GeneratorConfig) -> Instance:
    """Build an instance from a TSPLIB seed or a synthetic layout.

    The depot sits at the customer centroid or at the min-x/min-y corner of
    their bounding box; the customers nearest the depot are drone-eligible.
    """
    rng = np.random.default_rng(config.seed)
    if config.tsplib is not None:
        seed = read_tsplib(config.tsplib)
        customers = seed.coords
        metric = seed.edge_weight_type
        source = Path(config.tsplib).name
    else:
        customers = _synthetic_coords(config.n, config.cd, config.side, rng)
        metric = "EUC_2D"
        source = f"synthetic:{config.cd}"
    n = len(customers)
    if config.dp == "center":
        depot = customers.mean(axis=0)
    else:
        depot = customers.min(axis=0)
    coords = np.vstack([depot, customers, depot])
    rounded, straight = METRICS[metric]
    t = rounded(coords)
    np.fill_diagonal(t, 0.0)
    t[0, n + 1] = t[n + 1, 0] = 0.0
    k = n_eligible(config.el, n)
    order = sorted(range(1, n + 1), key=lambda i: (t[0, i], i))
    eligible = sorted(order[:k])
    flight = straight(coords[[0] + eligible])[0, 1:]
    d = np.zeros(n + 2)
    d[eligible] = 2.0 * flight / config.sp
    meta = {
        "source": source,
        "metric": metric,
        "dp": config.dp,
        "el": config.el,
        "sp": config.sp,
        "seed": config.seed,
        "drone_time_rounding": "none",
    }
    if config.tsplib is None:
        meta["cd"] = config.cd
    return Instance(
        n=n, m=config.m, truck_time=t, eligible=tuple(eligible), drone_time=d,
        coords=coords, name=config.label, meta=meta,
    )


def random_instance(n: int, m: int, el: float, seed: int, *, sp: float = 2.0,
                    dp: str = "center", cd: str = "random", side: float = 100.0) -> Instance:
    """Small synthetic instance used throughout the tests and the bench."""
    return generate(GeneratorConfig(dp=dp, el=el, sp=sp, m=m, seed=seed, n=n, cd=cd, side=side))
