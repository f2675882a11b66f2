"""Power-system data model and case file ingestion.

Case files are JSON with bus / line / generator / renewable tables and a
penalties block; see ``grid/data/case14.json`` for the full schema.  Bus ids
may be arbitrary integers; they are mapped to dense 0-based indices on load.
All powers are MW on ``base_mva``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

__all__ = ["GridModel", "load_case", "save_case", "bundled_case",
           "SchemaError", "DisconnectedNetwork"]


class SchemaError(Exception):
    pass


class DisconnectedNetwork(Exception):
    pass


@dataclass
class GridModel:
    name: str
    base_mva: float
    bus_ids: np.ndarray          # original ids, dense order
    bus_type: list               # "slack" | "pv" | "pq"
    load_share: np.ndarray       # per bus, sums to 1 over load buses
    line_from: np.ndarray        # 0-based bus indices
    line_to: np.ndarray
    reactance: np.ndarray        # p.u.
    flow_limit: np.ndarray       # MW
    phase_shift: np.ndarray      # rad, kept for the flow equation
    gen_bus: np.ndarray
    p_min: np.ndarray
    p_max: np.ndarray
    ramp_up: np.ndarray
    ramp_down: np.ndarray
    ramp_startup: np.ndarray
    ramp_shutdown: np.ndarray
    ramp_up_rd: np.ndarray
    ramp_down_rd: np.ndarray
    cost_fixed: np.ndarray
    cost_startup: np.ndarray
    cost_shutdown: np.ndarray
    cost_energy: np.ndarray
    cost_up_rd: np.ndarray
    cost_down_rd: np.ndarray
    ren_bus: np.ndarray
    ren_capacity: np.ndarray
    cost_load_shed: float
    cost_curtail: float
    cost_storage: float
    extras: dict = field(default_factory=dict)

    # -- sizes ------------------------------------------------------------------
    @property
    def n_bus(self):
        return len(self.bus_ids)

    @property
    def n_line(self):
        return len(self.line_from)

    @property
    def n_gen(self):
        return len(self.gen_bus)

    @property
    def n_ren(self):
        return len(self.ren_bus)

    @property
    def load_buses(self):
        return np.where(self.load_share > 0)[0]

    @property
    def n_load(self):
        return len(self.load_buses)

    # -- incidence ---------------------------------------------------------------
    def gen_incidence(self):
        C = np.zeros((self.n_bus, self.n_gen))
        C[self.gen_bus, np.arange(self.n_gen)] = 1.0
        return C

    def load_incidence(self):
        C = np.zeros((self.n_bus, self.n_load))
        C[self.load_buses, np.arange(self.n_load)] = 1.0
        return C

    def ren_incidence(self):
        C = np.zeros((self.n_bus, self.n_ren))
        C[self.ren_bus, np.arange(self.n_ren)] = 1.0
        return C

    def line_incidence(self):
        """Oriented incidence: +1 at from-bus, -1 at to-bus."""
        C = np.zeros((self.n_line, self.n_bus))
        C[np.arange(self.n_line), self.line_from] = 1.0
        C[np.arange(self.n_line), self.line_to] = -1.0
        return C


def _req(entry, key, where):
    if key not in entry:
        raise SchemaError(f"{where}: missing field {key!r}")
    return entry[key]


def _check_connected(n_bus, fr, to):
    adj = [[] for _ in range(n_bus)]
    for a, b in zip(fr, to):
        adj[a].append(b)
        adj[b].append(a)
    seen = np.zeros(n_bus, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    if not np.all(seen):
        isolated = np.where(~seen)[0]
        raise DisconnectedNetwork(f"buses {isolated.tolist()} unreachable")


def load_case(source) -> GridModel:
    """Build a validated GridModel from a case document (dict, JSON text or
    file path)."""
    if isinstance(source, dict):
        doc = source
    else:
        text = None
        s = str(source)
        if s.lstrip().startswith("{"):
            text = s
        else:
            with open(s, "r", encoding="utf-8") as f:
                text = f.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e}") from e

    buses = doc.get("buses")
    if not buses:
        raise SchemaError("no buses")
    bus_ids = np.array([_req(b, "id", "bus") for b in buses])
    if len(set(bus_ids.tolist())) != len(bus_ids):
        raise SchemaError("duplicate bus ids")
    idx = {int(b): i for i, b in enumerate(bus_ids)}
    bus_type = [b.get("type", "pq") for b in buses]
    if bus_type.count("slack") != 1:
        raise SchemaError(f"expected exactly one slack bus, got {bus_type.count('slack')}")
    load_share = np.array([float(b.get("load_share", 0.0)) for b in buses])
    if np.any(load_share < 0):
        raise SchemaError("negative load share")
    tot = load_share.sum()
    if tot > 0:
        load_share = load_share / tot

    lines = doc.get("lines", [])
    if not lines:
        raise SchemaError("no lines")
    fr = np.array([idx[int(_req(l, "from", "line"))] for l in lines])
    to = np.array([idx[int(_req(l, "to", "line"))] for l in lines])
    x = np.array([float(_req(l, "reactance", "line")) for l in lines])
    if np.any(x <= 0):
        raise SchemaError("reactances must be positive")
    lim = np.array([float(l.get("limit_mw", 1e4)) for l in lines])
    shift = np.array([float(l.get("phase_shift", 0.0)) for l in lines])
    _check_connected(len(buses), fr, to)

    gens = doc.get("generators", [])
    if not gens:
        raise SchemaError("no generators")

    def garr(key, default=None):
        out = []
        for g in gens:
            if default is None:
                out.append(float(_req(g, key, "generator")))
            else:
                out.append(float(g.get(key, default)))
        return np.array(out)

    gen_bus = np.array([idx[int(_req(g, "bus", "generator"))] for g in gens])
    p_min, p_max = garr("p_min"), garr("p_max")
    if np.any(p_min < 0) or np.any(p_min > p_max):
        raise SchemaError("generator limits must satisfy 0 <= p_min <= p_max")

    rens = doc.get("renewables", [])
    ren_bus = np.array([idx[int(_req(r, "bus", "renewable"))] for r in rens],
                       dtype=int)
    ren_cap = np.array([float(_req(r, "capacity_mw", "renewable")) for r in rens])

    pen = doc.get("penalties", {})
    costs = dict(
        cost_fixed=garr("cost_fixed", 0.0), cost_startup=garr("cost_startup", 0.0),
        cost_shutdown=garr("cost_shutdown", 0.0), cost_energy=garr("cost_energy"),
        cost_up_rd=garr("cost_up_rd", 0.0), cost_down_rd=garr("cost_down_rd", 0.0))
    for k, v in costs.items():
        if np.any(v < 0):
            raise SchemaError(f"{k} must be nonnegative")

    g = GridModel(
        name=doc.get("name", "case"),
        base_mva=float(doc.get("base_mva", 100.0)),
        bus_ids=bus_ids, bus_type=bus_type, load_share=load_share,
        line_from=fr, line_to=to, reactance=x, flow_limit=lim,
        phase_shift=shift,
        gen_bus=gen_bus, p_min=p_min, p_max=p_max,
        ramp_up=garr("ramp_up", 1e4), ramp_down=garr("ramp_down", 1e4),
        ramp_startup=garr("ramp_startup", 1e4),
        ramp_shutdown=garr("ramp_shutdown", 1e4),
        ramp_up_rd=garr("ramp_up_rd", 1e4), ramp_down_rd=garr("ramp_down_rd", 1e4),
        ren_bus=ren_bus, ren_capacity=ren_cap,
        cost_load_shed=float(pen.get("load_shed", 1000.0)),
        cost_curtail=float(pen.get("curtailment", 50.0)),
        cost_storage=float(pen.get("storage", 50.0)),
        **costs)
    return g


def save_case(g: GridModel, path):
    doc = {
        "name": g.name, "base_mva": g.base_mva,
        "buses": [{"id": int(i), "type": t, "load_share": float(s)}
                  for i, t, s in zip(g.bus_ids, g.bus_type, g.load_share)],
        "lines": [{"from": int(g.bus_ids[a]), "to": int(g.bus_ids[b]),
                   "reactance": float(x), "limit_mw": float(l),
                   "phase_shift": float(p)}
                  for a, b, x, l, p in zip(g.line_from, g.line_to, g.reactance,
                                           g.flow_limit, g.phase_shift)],
        "generators": [
            {"bus": int(g.bus_ids[g.gen_bus[i]]),
             "p_min": float(g.p_min[i]), "p_max": float(g.p_max[i]),
             "ramp_up": float(g.ramp_up[i]), "ramp_down": float(g.ramp_down[i]),
             "ramp_startup": float(g.ramp_startup[i]),
             "ramp_shutdown": float(g.ramp_shutdown[i]),
             "ramp_up_rd": float(g.ramp_up_rd[i]),
             "ramp_down_rd": float(g.ramp_down_rd[i]),
             "cost_fixed": float(g.cost_fixed[i]),
             "cost_startup": float(g.cost_startup[i]),
             "cost_shutdown": float(g.cost_shutdown[i]),
             "cost_energy": float(g.cost_energy[i]),
             "cost_up_rd": float(g.cost_up_rd[i]),
             "cost_down_rd": float(g.cost_down_rd[i])}
            for i in range(g.n_gen)],
        "renewables": [{"bus": int(g.bus_ids[b]), "capacity_mw": float(c)}
                       for b, c in zip(g.ren_bus, g.ren_capacity)],
        "penalties": {"load_shed": g.cost_load_shed,
                      "curtailment": g.cost_curtail,
                      "storage": g.cost_storage},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)


def bundled_case(name="case14") -> GridModel:
    """Load one of the cases shipped with the package."""
    ref = resources.files("gridlearn.grid").joinpath(f"data/{name}.json")
    return load_case(json.loads(ref.read_text(encoding="utf-8")))
