"""Metapopulation model: districts coupled by daily commuter mobility.

Each district runs the compartment model of :mod:`episim.model`; once per
simulated day, after integration, commuters are exchanged between
districts in a single simultaneous step. Only people who can plausibly
travel move: the susceptible, exposed, carrier and recovered
compartments. Symptomatic, hospitalised, critical and dead people stay.

An edge with ``commuters`` persons moves a fraction of the source
district's mobile pool proportional to each mobile compartment's share of
that pool, based on the pre-exchange state. When the commuter demand of a
district exceeds its mobile pool, all its outgoing flows are scaled down
proportionally (and the event is counted), so no compartment is driven
negative. Because inflows and outflows use the same flux values the total
population is conserved to round-off.

Edges are kept in a canonical order (sorted by source then target id), so
simulation results do not depend on the order in which edges were listed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import FormatError, ValidationError
from .model import (
    DEFAULT_DT,
    AgeGroups,
    Compartment,
    CompartmentTensor,
    ContactMatrices,
    Damping,
    EpiParameters,
    _integrate_day,
    _ParamStack,
    effective_contacts,
    steps_per_day,
)

log = logging.getLogger(__name__)

# Compartments that take part in commuter exchange, in canonical order.
MOBILE_COMPARTMENTS = (
    Compartment.SUSCEPTIBLE,
    Compartment.EXPOSED,
    Compartment.CARRIER,
    Compartment.RECOVERED,
)

_MOBILE_IDX = np.array([int(c) for c in MOBILE_COMPARTMENTS])


@dataclass(frozen=True)
class District:
    """One node of the metapopulation graph."""

    id: str
    name: str
    initial: CompartmentTensor
    parameters: EpiParameters | None = None
    dampings: tuple[Damping, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "dampings", tuple(self.dampings))
        if not self.id:
            raise ValidationError("district id must be non-empty")
        if not self.name:
            raise ValidationError(f"district {self.id}: name must be non-empty")


@dataclass(frozen=True)
class MobilityEdge:
    """Directed commuter flow between two districts, per age group."""

    source: str
    target: str
    commuters: np.ndarray

    def __post_init__(self) -> None:
        arr = np.atleast_1d(np.asarray(self.commuters, dtype=np.float64))
        if arr.ndim != 1:
            raise ValidationError("edge commuters must be one value per age group")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError(
                f"edge {self.source}->{self.target}: commuters must be finite and >= 0"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "commuters", arr)
        if self.source == self.target:
            raise ValidationError(f"edge {self.source}->{self.target}: no self-loops")


@dataclass(frozen=True)
class GraphModel:
    """Districts, shared epidemiology and the commuter edges between them."""

    age_groups: AgeGroups
    contacts: ContactMatrices
    parameters: EpiParameters
    districts: tuple[District, ...]
    edges: tuple[MobilityEdge, ...] = ()
    dampings: tuple[Damping, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "districts", tuple(self.districts))
        object.__setattr__(self, "dampings", tuple(self.dampings))
        # Canonical edge order makes results independent of listing order.
        object.__setattr__(
            self,
            "edges",
            tuple(sorted(self.edges, key=lambda e: (e.source, e.target))),
        )
        if not self.districts:
            raise ValidationError("graph needs at least one district")
        num_groups = self.age_groups.size
        if self.contacts.num_groups != num_groups:
            raise ValidationError("contact matrices disagree with age group count")
        if self.parameters.num_groups != num_groups:
            raise ValidationError("parameters disagree with age group count")
        ids = [d.id for d in self.districts]
        if len(set(ids)) != len(ids):
            raise ValidationError("district ids must be unique")
        known = set(ids)
        for district in self.districts:
            if district.initial.num_groups != num_groups:
                raise ValidationError(
                    f"district {district.id}: initial state disagrees with age group count"
                )
            if district.parameters is not None and district.parameters.num_groups != num_groups:
                raise ValidationError(
                    f"district {district.id}: parameters disagree with age group count"
                )
        seen_pairs = set()
        for edge in self.edges:
            if edge.source not in known or edge.target not in known:
                raise ValidationError(
                    f"edge {edge.source}->{edge.target} references an unknown district"
                )
            if edge.commuters.shape != (num_groups,):
                raise ValidationError(
                    f"edge {edge.source}->{edge.target}: commuters must list "
                    f"{num_groups} age groups"
                )
            pair = (edge.source, edge.target)
            if pair in seen_pairs:
                raise ValidationError(
                    f"duplicate edge {edge.source}->{edge.target}; merge commuter counts"
                )
            seen_pairs.add(pair)

    @property
    def num_districts(self) -> int:
        return len(self.districts)

    @property
    def district_ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.districts)

    def district(self, district_id: str) -> District:
        for d in self.districts:
            if d.id == district_id:
                return d
        raise ValidationError(f"unknown district {district_id!r}")

    def initial_states(self) -> np.ndarray:
        """Stacked initial compartments, shape (districts, groups, compartments)."""
        return np.stack([d.initial.values for d in self.districts])

    def to_dict(self) -> dict:
        data = {
            "age_groups": self.age_groups.to_dicts(),
            "contacts": self.contacts.to_dict(),
            "parameters": self.parameters.to_dict(),
            "districts": [],
            "edges": [
                {
                    "from": e.source,
                    "to": e.target,
                    "commuters": e.commuters.tolist(),
                }
                for e in self.edges
            ],
            "dampings": [d.to_dict() for d in self.dampings],
        }
        for district in self.districts:
            entry: dict = {
                "id": district.id,
                "name": district.name,
                "initial": district.initial.to_dict(),
            }
            if district.parameters is not None:
                entry["parameters"] = district.parameters.to_dict()
            if district.dampings:
                entry["dampings"] = [d.to_dict() for d in district.dampings]
            data["districts"].append(entry)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "GraphModel":
        try:
            age_groups = AgeGroups.from_dicts(data["age_groups"])
            num_groups = age_groups.size
            contacts = ContactMatrices.from_dict(data["contacts"])
            parameters = EpiParameters.from_dict(data["parameters"], num_groups)
            districts = []
            for entry in data["districts"]:
                districts.append(District(
                    id=str(entry["id"]),
                    name=str(entry["name"]),
                    initial=CompartmentTensor.from_dict(entry["initial"], num_groups),
                    parameters=(
                        EpiParameters.from_dict(entry["parameters"], num_groups)
                        if "parameters" in entry else None
                    ),
                    dampings=tuple(
                        Damping.from_dict(d) for d in entry.get("dampings", [])
                    ),
                ))
            edges = tuple(
                MobilityEdge(
                    source=str(e["from"]),
                    target=str(e["to"]),
                    commuters=np.asarray(e["commuters"], dtype=np.float64),
                )
                for e in data.get("edges", [])
            )
            dampings = tuple(Damping.from_dict(d) for d in data.get("dampings", []))
        except KeyError as exc:
            raise FormatError(f"graph definition is missing field {exc.args[0]!r}") from exc
        return cls(
            age_groups=age_groups,
            contacts=contacts,
            parameters=parameters,
            districts=tuple(districts),
            edges=edges,
            dampings=dampings,
        )


def load_graph(path: str | Path) -> GraphModel:
    """Read a graph definition from a JSON file."""
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return GraphModel.from_dict(data)


def save_graph(graph: GraphModel, path: str | Path) -> None:
    """Write a graph definition to a JSON file."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(graph.to_dict(), handle, indent=2)
        handle.write("\n")


class _EdgeArrays:
    """Edge list in array form for vectorised exchange."""

    __slots__ = ("src", "tgt", "commuters")

    def __init__(self, graph: GraphModel) -> None:
        index = {d.id: i for i, d in enumerate(graph.districts)}
        self.src = np.array([index[e.source] for e in graph.edges], dtype=np.intp)
        self.tgt = np.array([index[e.target] for e in graph.edges], dtype=np.intp)
        if graph.edges:
            self.commuters = np.stack([e.commuters for e in graph.edges])
        else:
            self.commuters = np.zeros((0, graph.age_groups.size))


def mobility_exchange(
    states: np.ndarray,
    src: np.ndarray,
    tgt: np.ndarray,
    commuters: np.ndarray,
) -> tuple[np.ndarray, int]:
    """Apply one simultaneous commuter exchange.

    ``states`` has shape (districts, groups, compartments); ``src`` and
    ``tgt`` are district indices per edge and ``commuters`` persons per
    (edge, group). Returns the post-exchange states and the number of
    (district, group) pools whose demand had to be clamped.
    """
    mobile = states[:, :, _MOBILE_IDX]
    pool = mobile.sum(axis=-1)

    demand = np.zeros_like(pool)
    np.add.at(demand, src, commuters)
    over = demand > pool
    clamp_events = int(np.count_nonzero(over))
    if clamp_events:
        log.warning(
            "commuter demand exceeds mobile population in %d (district, group) pools;"
            " outgoing flows scaled down",
            clamp_events,
        )
    scale = np.ones_like(pool)
    scale[over] = pool[over] / demand[over]

    share = np.divide(
        mobile, pool[..., None], out=np.zeros_like(mobile), where=pool[..., None] > 0.0
    )
    movers = commuters * scale[src]
    flux = movers[..., None] * share[src]

    outflow = np.zeros_like(mobile)
    inflow = np.zeros_like(mobile)
    np.add.at(outflow, src, flux)
    np.add.at(inflow, tgt, flux)

    updated = states.copy()
    updated[:, :, _MOBILE_IDX] = np.maximum(mobile - outflow + inflow, 0.0)
    return updated, clamp_events


@dataclass
class GraphTrajectory:
    """Simulation output for a whole graph.

    values:
        Array of shape (num_days + 1, districts, groups, compartments),
        sampled at integer days; day 0 is the initial state.
    clamp_events:
        How often a district's commuter demand exceeded its mobile pool.
    """

    values: np.ndarray
    district_ids: tuple[str, ...]
    group_labels: tuple[str, ...]
    clamp_events: int = 0
    dampings_used: tuple[Damping, ...] = field(default=(), repr=False)


def simulate_graph(
    graph: GraphModel,
    num_days: int,
    dt: float = DEFAULT_DT,
    dampings: Sequence[Damping] | None = None,
) -> GraphTrajectory:
    """Simulate every district and exchange commuters once per day.

    ``dampings`` overrides the graph-wide damping schedule when given;
    district-local dampings apply on top either way. Within a day the
    contact matrices are frozen; the exchange happens after the day's
    integration, so day-sampled states are post-exchange.
    """
    if num_days < 1:
        raise ValidationError("num_days must be >= 1")
    steps = steps_per_day(dt)
    shared = tuple(graph.dampings if dampings is None else dampings)

    params = _ParamStack.of([
        d.parameters if d.parameters is not None else graph.parameters
        for d in graph.districts
    ])
    edges = _EdgeArrays(graph)
    states = graph.initial_states()
    trajectory = np.empty((num_days + 1,) + states.shape)
    trajectory[0] = states

    local = [shared + d.dampings for d in graph.districts]
    total_clamps = 0
    for day in range(num_days):
        contacts = np.stack([
            effective_contacts(graph.contacts, schedule, day) for schedule in local
        ])
        states = _integrate_day(states, params, contacts, steps, dt)
        states, clamps = mobility_exchange(
            states, edges.src, edges.tgt, edges.commuters
        )
        total_clamps += clamps
        trajectory[day + 1] = states

    return GraphTrajectory(
        values=trajectory,
        district_ids=graph.district_ids,
        group_labels=graph.age_groups.labels,
        clamp_events=total_clamps,
        dampings_used=shared,
    )
