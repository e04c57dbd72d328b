"""Vehicle topology data model, synthetic street-block generator, mobility
trace ingestion, and line-delimited JSON serialization.

The generator lays out a Manhattan-style street grid inside a rectangular
area, fills non-street blocks with axis-aligned rectangular buildings, and
drops vehicles on the streets only. It replaces proprietary GPS data with a
reproducible source of topologies: every output is a pure function of the
seed and the generator config.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Obstacle, Point2D, axis_aligned_obstacle

TOPOLOGY_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1

# 20 MB of requested data, SI convention: 20e6 bytes = 1.6e8 bits.
DEFAULT_DEMAND_BITS = 1.6e8


@dataclass(frozen=True)
class Spv:
    id: int
    pos: Point2D
    heading: float     # travel direction, radians
    active: int        # 1 = can provide services, 0 = off duty


@dataclass(frozen=True)
class CommRequest:
    id: int
    pos: Point2D
    demand_bits: float


@dataclass(frozen=True)
class SenseRequest:
    id: int
    pos: Point2D


@dataclass(frozen=True)
class ServiceRequirements:
    """Success thresholds: delay budget for data delivery and the minimum
    sensing SINR. The SINR is stored in dB and converted to linear scale at
    the comparison site."""

    d_max: float = 0.005     # seconds
    sinr_min: float = 3.0    # dB

    def __post_init__(self):
        if self.d_max <= 0:
            raise ValueError("d_max must be strictly positive")
        if self.sinr_min <= 0:
            raise ValueError("sinr_min must be strictly positive")

    @property
    def sinr_min_linear(self) -> float:
        return 10.0 ** (self.sinr_min / 10.0)


@dataclass
class Topology:
    """One decision-making snapshot of the vehicular network."""

    spvs: list[Spv]
    comm_requests: list[CommRequest]
    sense_requests: list[SenseRequest]
    obstacles: list[Obstacle]
    seed: int = 0
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ids = ([s.id for s in self.spvs] + [c.id for c in self.comm_requests]
               + [s.id for s in self.sense_requests])
        if len(ids) != len(set(ids)):
            raise ValueError("vehicle ids must be unique across the topology")
        self._index = {}
        for s in self.spvs:
            self._index[s.id] = s
        for c in self.comm_requests:
            self._index[c.id] = c
        for s in self.sense_requests:
            self._index[s.id] = s

    @property
    def num_spvs(self) -> int:
        return len(self.spvs)

    @property
    def num_comm(self) -> int:
        return len(self.comm_requests)

    @property
    def num_sense(self) -> int:
        return len(self.sense_requests)

    def node_by_id(self, vid: int):
        return self._index[vid]

    def spv_by_id(self, vid: int) -> Spv:
        node = self._index[vid]
        if not isinstance(node, Spv):
            raise KeyError(f"vehicle {vid} is not an SPV")
        return node

    def request_ids(self) -> list[int]:
        """Request vehicle ids, comm first then sensing, each in id order."""
        return ([c.id for c in sorted(self.comm_requests, key=lambda c: c.id)]
                + [s.id for s in sorted(self.sense_requests, key=lambda s: s.id)])

    def all_ids(self) -> list[int]:
        """All vehicle ids: SPVs, comm, sensing, each group in id order."""
        return ([s.id for s in sorted(self.spvs, key=lambda s: s.id)]
                + self.request_ids())


@dataclass(frozen=True)
class GeneratorConfig:
    """Synthetic street-block scenario parameters."""

    area: tuple[float, float] = (100.0, 100.0)
    street_pitch: float = 50.0     # distance between street centerlines, m
    street_width: float = 10.0     # two lanes per direction
    building_density: float = 0.5  # fraction of each block covered
    num_spv: int = 10
    num_comm: int = 2
    num_sense: int = 2
    demand_bits: float = DEFAULT_DEMAND_BITS
    active_prob: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.area[0] <= 0 or self.area[1] <= 0:
            raise ValueError("area must be positive")
        if not 0.0 <= self.building_density <= 1.0:
            raise ValueError("building_density must lie in [0, 1]")
        if not 0.0 <= self.active_prob <= 1.0:
            raise ValueError("active_prob must lie in [0, 1]")
        if self.street_width >= self.street_pitch:
            raise ValueError("infeasible density: streets leave no room for blocks")
        if min(self.num_spv, self.num_comm, self.num_sense) < 1:
            raise ValueError("need at least one vehicle of each role")


def _street_bands(extent: float, pitch: float, width: float) -> list[tuple[float, float]]:
    """Street intervals along one axis: bands of the given width centered at
    pitch/2 + k*pitch."""
    bands = []
    k = 0
    while True:
        center = pitch / 2.0 + k * pitch
        if center - width / 2.0 >= extent:
            break
        lo = max(0.0, center - width / 2.0)
        hi = min(extent, center + width / 2.0)
        if hi > lo:
            bands.append((lo, hi))
        k += 1
    return bands


def _in_bands(v: float, bands: list[tuple[float, float]]) -> bool:
    return any(lo <= v <= hi for lo, hi in bands)


def _sample_street_position(rng: np.random.Generator, gc: GeneratorConfig,
                            xbands, ybands) -> tuple[Point2D, float]:
    """Uniform position on the street area plus a lane-aligned heading."""
    w, h = gc.area
    for _ in range(10000):
        x = rng.uniform(0.0, w)
        y = rng.uniform(0.0, h)
        on_v = _in_bands(x, xbands)
        on_h = _in_bands(y, ybands)
        if not (on_v or on_h):
            continue
        if on_v and on_h:
            # Intersection: pick an axis at random.
            on_v = bool(rng.integers(0, 2))
            on_h = not on_v
        if on_v:
            heading = math.pi / 2.0 if rng.integers(0, 2) else 3.0 * math.pi / 2.0
        else:
            heading = 0.0 if rng.integers(0, 2) else math.pi
        return Point2D(x, y), heading
    raise RuntimeError("could not place a vehicle on the street area")


def _block_buildings(rng: np.random.Generator, gc: GeneratorConfig,
                     xbands, ybands) -> list[Obstacle]:
    """One axis-aligned building per block, sized by building_density, with a
    margin so walls never touch the street."""
    if gc.building_density <= 0.0:
        return []
    w, h = gc.area
    xcuts = [0.0] + [v for band in xbands for v in band] + [w]
    ycuts = [0.0] + [v for band in ybands for v in band] + [h]
    obstacles = []
    margin = 1.0
    for xi in range(0, len(xcuts) - 1, 2):
        for yi in range(0, len(ycuts) - 1, 2):
            bx0, bx1 = xcuts[xi], xcuts[xi + 1]
            by0, by1 = ycuts[yi], ycuts[yi + 1]
            bw, bh = bx1 - bx0, by1 - by0
            if bw <= 2 * margin + 1.0 or bh <= 2 * margin + 1.0:
                continue
            side = math.sqrt(gc.building_density)
            ww = max(1.0, side * (bw - 2 * margin))
            hh = max(1.0, side * (bh - 2 * margin))
            cx = rng.uniform(bx0 + margin + ww / 2.0, bx1 - margin - ww / 2.0)
            cy = rng.uniform(by0 + margin + hh / 2.0, by1 - margin - hh / 2.0)
            obstacles.append(axis_aligned_obstacle(cx - ww / 2.0, cy - hh / 2.0,
                                                   cx + ww / 2.0, cy + hh / 2.0))
    return obstacles


def generate_topology(gc: GeneratorConfig) -> Topology:
    """Generate one street-block topology, deterministic given gc.seed.

    Vehicles live on street segments only; buildings occupy block interiors;
    SPV activity is Bernoulli(active_prob). Ids are assigned 0..V-1 in the
    order SPVs, comm requests, sensing requests.
    """
    rng = np.random.default_rng(gc.seed)
    w, h = gc.area
    xbands = _street_bands(w, gc.street_pitch, gc.street_width)
    ybands = _street_bands(h, gc.street_pitch, gc.street_width)
    if not xbands and not ybands:
        raise ValueError("infeasible density: no street room in the area")

    obstacles = _block_buildings(rng, gc, xbands, ybands)

    spvs = []
    for i in range(gc.num_spv):
        pos, heading = _sample_street_position(rng, gc, xbands, ybands)
        active = int(rng.random() < gc.active_prob)
        spvs.append(Spv(id=i, pos=pos, heading=heading, active=active))
    comm = []
    for j in range(gc.num_comm):
        pos, _ = _sample_street_position(rng, gc, xbands, ybands)
        comm.append(CommRequest(id=gc.num_spv + j, pos=pos, demand_bits=gc.demand_bits))
    sense = []
    for k in range(gc.num_sense):
        pos, _ = _sample_street_position(rng, gc, xbands, ybands)
        sense.append(SenseRequest(id=gc.num_spv + gc.num_comm + k, pos=pos))
    return Topology(spvs=spvs, comm_requests=comm, sense_requests=sense,
                    obstacles=obstacles, seed=gc.seed)


def config_hash(gc: GeneratorConfig) -> str:
    payload = json.dumps({
        "area": list(gc.area), "street_pitch": gc.street_pitch,
        "street_width": gc.street_width, "building_density": gc.building_density,
        "num_spv": gc.num_spv, "num_comm": gc.num_comm, "num_sense": gc.num_sense,
        "demand_bits": gc.demand_bits, "active_prob": gc.active_prob,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def generate_dataset(gc: GeneratorConfig, n_train: int = 1500, n_val: int = 1000,
                     n_test: int = 1000) -> dict[str, list[Topology]]:
    """Generate disjoint train/val/test topology collections.

    Split k gets consecutive seeds offset from gc.seed, so no seed appears in
    two splits and any split can be regenerated independently.
    """
    if min(n_train, n_val, n_test) < 1:
        raise ValueError("every split needs at least one topology")
    counts = {"train": n_train, "val": n_val, "test": n_test}
    out: dict[str, list[Topology]] = {}
    offset = 0
    for name in ("train", "val", "test"):
        topos = []
        for i in range(counts[name]):
            gci = GeneratorConfig(**{**gc.__dict__, "seed": gc.seed + offset + i})
            topos.append(generate_topology(gci))
        out[name] = topos
        offset += counts[name]
    return out


def dataset_manifest(gc: GeneratorConfig, splits: dict[str, list[Topology]],
                     paths: dict[str, str]) -> dict:
    return {
        "version": MANIFEST_SCHEMA_VERSION,
        "config_hash": config_hash(gc),
        "base_seed": gc.seed,
        "splits": {
            name: {"path": paths[name], "seeds": [t.seed for t in topos]}
            for name, topos in splits.items()
        },
    }


# ---------------------------------------------------------------------------
# Serialization: one JSON object per line, schema-versioned.

def topology_to_dict(t: Topology) -> dict:
    return {
        "version": TOPOLOGY_SCHEMA_VERSION,
        "seed": t.seed,
        "spvs": [{"id": s.id, "x": s.pos.x, "y": s.pos.y,
                  "heading": s.heading, "active": s.active} for s in t.spvs],
        "comm": [{"id": c.id, "x": c.pos.x, "y": c.pos.y,
                  "demand_bits": c.demand_bits} for c in t.comm_requests],
        "sense": [{"id": s.id, "x": s.pos.x, "y": s.pos.y} for s in t.sense_requests],
        "obstacles": [[[v.x, v.y] for v in o.vertices] for o in t.obstacles],
    }


def topology_from_dict(d: dict) -> Topology:
    version = d.get("version")
    if version != TOPOLOGY_SCHEMA_VERSION:
        raise ValueError(f"unknown topology schema version {version!r}, "
                         f"expected {TOPOLOGY_SCHEMA_VERSION}")
    for key in ("seed", "spvs", "comm", "sense", "obstacles"):
        if key not in d:
            raise ValueError(f"topology record missing field {key!r}")
    spvs = [Spv(id=s["id"], pos=Point2D(s["x"], s["y"]), heading=s["heading"],
                active=s["active"]) for s in d["spvs"]]
    comm = [CommRequest(id=c["id"], pos=Point2D(c["x"], c["y"]),
                        demand_bits=c["demand_bits"]) for c in d["comm"]]
    sense = [SenseRequest(id=s["id"], pos=Point2D(s["x"], s["y"])) for s in d["sense"]]
    obstacles = [Obstacle(tuple(Point2D(x, y) for x, y in verts))
                 for verts in d["obstacles"]]
    return Topology(spvs=spvs, comm_requests=comm, sense_requests=sense,
                    obstacles=obstacles, seed=d["seed"])


def save_topologies(topologies: list[Topology], path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as f:
        for t in topologies:
            f.write(json.dumps(topology_to_dict(t), sort_keys=True) + "\n")


def load_topologies(path: str | Path) -> list[Topology]:
    path = Path(path)
    out = []
    with path.open() as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(topology_from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {e}") from e
    return out


def save_topology(t: Topology, path: str | Path) -> None:
    save_topologies([t], path)


def load_topology(path: str | Path) -> Topology:
    topos = load_topologies(path)
    if len(topos) != 1:
        raise ValueError(f"expected exactly one topology in {path}, got {len(topos)}")
    return topos[0]


# ---------------------------------------------------------------------------
# Trace ingestion: generic CSV of (time, id, x, y, heading) rows.

TRACE_COLUMNS = ("time", "id", "x", "y", "heading")


def ingest_traces(path: str | Path, num_spv: int, num_comm: int, num_sense: int,
                  interval: float = 30.0, demand_bits: float = DEFAULT_DEMAND_BITS,
                  active_prob: float = 0.9, obstacles: list[Obstacle] | None = None,
                  seed: int = 0) -> list[Topology]:
    """Convert a mobility trace into topology snapshots.

    Snapshots are taken at every timestamp that is a whole multiple of
    `interval` past the earliest one; a vehicle's position is its last
    reported row at or before the snapshot time. Roles are assigned
    round-robin (spv, comm, sense, ...) over the distinct vehicle ids in
    sorted order until each role count is filled; SPV activity is resampled
    per snapshot.
    """
    path = Path(path)
    rows = []
    with path.open() as f:
        reader = csv.reader(f)
        for lineno, raw in enumerate(reader, start=1):
            if not raw or raw[0].strip().startswith("#"):
                continue
            if lineno == 1 and raw[0].strip().lower() == "time":
                continue  # header row
            if len(raw) != len(TRACE_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} "
                                 f"columns {TRACE_COLUMNS}, got {len(raw)}")
            try:
                rows.append((float(raw[0]), str(raw[1].strip()), float(raw[2]),
                             float(raw[3]), float(raw[4])))
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: malformed row: {e}") from e
    if not rows:
        raise ValueError(f"{path}: empty trace file")

    rows.sort(key=lambda r: (r[0], r[1]))
    vehicle_ids = sorted({r[1] for r in rows})
    need = num_spv + num_comm + num_sense
    if len(vehicle_ids) < need:
        raise ValueError(f"trace has {len(vehicle_ids)} vehicles, "
                         f"need {need} for the requested role counts")

    roles: dict[str, str] = {}
    remaining = {"spv": num_spv, "comm": num_comm, "sense": num_sense}
    cycle = ("spv", "comm", "sense")
    ci = 0
    for vid in vehicle_ids:
        if sum(remaining.values()) == 0:
            break
        while remaining[cycle[ci % 3]] == 0:
            ci += 1
        roles[vid] = cycle[ci % 3]
        remaining[cycle[ci % 3]] -= 1
        ci += 1

    t0 = rows[0][0]
    times = sorted({r[0] for r in rows})
    snap_times = [t for t in times if abs((t - t0) % interval) < 1e-9
                  or abs((t - t0) % interval - interval) < 1e-9]

    obstacles = obstacles or []
    rng = np.random.default_rng(seed)
    topologies = []
    last: dict[str, tuple[float, float, float]] = {}
    row_iter = iter(rows)
    pending = next(row_iter, None)
    for snap_idx, st in enumerate(snap_times):
        while pending is not None and pending[0] <= st + 1e-9:
            _, vid, x, y, heading = pending
            last[vid] = (x, y, heading)
            pending = next(row_iter, None)
        spvs, comm, sense = [], [], []
        for vid in vehicle_ids:
            if roles.get(vid) == "spv" and vid in last:
                x, y, heading = last[vid]
                active = int(rng.random() < active_prob)
                spvs.append(Spv(id=len(spvs), pos=Point2D(x, y),
                                heading=heading, active=active))
        offset = len(spvs)
        for vid in vehicle_ids:
            if roles.get(vid) == "comm" and vid in last:
                x, y, _ = last[vid]
                comm.append(CommRequest(id=offset + len(comm), pos=Point2D(x, y),
                                        demand_bits=demand_bits))
        offset += len(comm)
        for vid in vehicle_ids:
            if roles.get(vid) == "sense" and vid in last:
                x, y, _ = last[vid]
                sense.append(SenseRequest(id=offset + len(sense), pos=Point2D(x, y)))
        topologies.append(Topology(spvs=spvs, comm_requests=comm,
                                   sense_requests=sense, obstacles=list(obstacles),
                                   seed=seed + snap_idx))
    return topologies
