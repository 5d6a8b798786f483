"""Ensemble runs: parameter sampling, percentile bands and trends.

A scenario runs the metapopulation model many times with disease
parameters drawn from per-field uniform ranges. Each ensemble member is
keyed by (seed, member index) through a counter-based generator, so
members are reproducible individually and the whole ensemble is
reproducible bit for bit regardless of execution order.

Aggregates are computed per member before any percentile is taken:
the national curve is the sum over districts and the all-ages curve the
sum over age groups of that member's trajectory. Percentiles do not
commute with sums, so aggregating afterwards would misstate the bands.
The five standard percentiles (5, 25, 50, 75, 95) use linear
interpolation between order statistics.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .graph import GraphModel, simulate_graph
from .model import (
    DEFAULT_DT,
    DURATION_FIELDS,
    NUM_COMPARTMENTS,
    PARAMETER_FIELDS,
    PROBABILITY_FIELDS,
    Compartment,
    Damping,
    EpiParameters,
)

PERCENTILES = (5, 25, 50, 75, 95)

# District id of the summed-over-all-districts aggregate row.
NATIONAL_ID = "00000"

# Group label of the summed-over-all-age-groups aggregate row.
TOTAL_GROUP = "total"

# Relative change of the median below which a trend counts as stable.
STABLE_THRESHOLD = 0.01

_ID_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")


def _range_bounds(field: str, low: np.ndarray, high: np.ndarray) -> None:
    if np.any(low > high):
        raise ValidationError(f"range for {field}: low must not exceed high")
    if field in DURATION_FIELDS and np.any(low <= 0):
        raise ValidationError(f"range for {field}: durations must be > 0")
    if field in PROBABILITY_FIELDS and (np.any(low < 0) or np.any(high > 1)):
        raise ValidationError(f"range for {field}: probabilities must lie in [0, 1]")
    if field == "transmission_prob" and np.any(low < 0):
        raise ValidationError(f"range for {field}: must be >= 0")


@dataclass(frozen=True)
class ParameterRange:
    """Uniform sampling interval for one parameter field.

    ``low`` and ``high`` are either scalars (applied to every age group)
    or one value per age group. A degenerate range (low == high) pins the
    field to that value in every member.
    """

    field: str
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self) -> None:
        if self.field not in PARAMETER_FIELDS:
            raise ValidationError(f"unknown parameter field {self.field!r}")
        low = np.asarray(self.low, dtype=np.float64)
        high = np.asarray(self.high, dtype=np.float64)
        if low.ndim > 1 or high.ndim > 1 or low.shape != high.shape:
            raise ValidationError(
                f"range for {self.field}: low and high must be scalars or "
                "equally sized per-group lists"
            )
        if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high))):
            raise ValidationError(f"range for {self.field}: bounds must be finite")
        _range_bounds(self.field, low, high)
        for name, arr in (("low", low), ("high", high)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def resolve(self, num_groups: int) -> tuple[np.ndarray, np.ndarray]:
        """Bounds broadcast to one value per age group."""
        if self.low.ndim == 1 and self.low.shape[0] != num_groups:
            raise ValidationError(
                f"range for {self.field}: expected {num_groups} per-group values,"
                f" got {self.low.shape[0]}"
            )
        low = np.broadcast_to(self.low, (num_groups,)).astype(np.float64)
        high = np.broadcast_to(self.high, (num_groups,)).astype(np.float64)
        return low, high

    def to_dict(self) -> dict:
        def plain(arr: np.ndarray):
            return float(arr) if arr.ndim == 0 else arr.tolist()

        return {"field": self.field, "low": plain(self.low), "high": plain(self.high)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ParameterRange":
        try:
            return cls(
                field=str(data["field"]),
                low=np.asarray(data["low"], dtype=np.float64),
                high=np.asarray(data["high"], dtype=np.float64),
            )
        except KeyError as exc:
            raise ValidationError(f"parameter range is missing {exc.args[0]!r}") from exc


@dataclass(frozen=True)
class ScenarioDefinition:
    """A named intervention setting plus its sampling configuration.

    The scenario's damping schedule fully replaces the graph's own when
    the scenario runs; district-local dampings still apply on top. The
    ``num_members``, ``num_days`` and ``seed`` fields are the defaults
    used when a run does not specify them explicitly.
    """

    id: str
    name: str
    description: str = ""
    dampings: tuple[Damping, ...] = ()
    ranges: tuple[ParameterRange, ...] = ()
    num_members: int = 32
    num_days: int = 30
    seed: int = 0
    color: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "dampings", tuple(self.dampings))
        object.__setattr__(self, "ranges", tuple(self.ranges))
        if not _ID_PATTERN.match(self.id):
            raise ValidationError(
                f"scenario id {self.id!r} must be alphanumeric with - or _"
            )
        if not self.name:
            raise ValidationError("scenario name must be non-empty")
        fields = [r.field for r in self.ranges]
        if len(set(fields)) != len(fields):
            raise ValidationError("at most one range per parameter field")
        if self.num_members < 1:
            raise ValidationError("num_members must be >= 1")
        if self.num_days < 1:
            raise ValidationError("num_days must be >= 1")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")

    def to_dict(self) -> dict:
        data = {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "dampings": [d.to_dict() for d in self.dampings],
            "ranges": [r.to_dict() for r in self.ranges],
            "num_members": self.num_members,
            "num_days": self.num_days,
            "seed": self.seed,
        }
        if self.color is not None:
            data["color"] = self.color
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioDefinition":
        try:
            return cls(
                id=str(data["id"]),
                name=str(data["name"]),
                description=str(data.get("description", "")),
                dampings=tuple(Damping.from_dict(d) for d in data.get("dampings", [])),
                ranges=tuple(
                    ParameterRange.from_dict(r) for r in data.get("ranges", [])
                ),
                num_members=int(data.get("num_members", 32)),
                num_days=int(data.get("num_days", 30)),
                seed=int(data.get("seed", 0)),
                color=data.get("color"),
            )
        except KeyError as exc:
            raise ValidationError(f"scenario is missing field {exc.args[0]!r}") from exc


def sample_parameters(
    base: EpiParameters,
    ranges: Sequence[ParameterRange],
    seed: int,
    member_index: int,
) -> EpiParameters:
    """Draw one member's parameters.

    The generator is keyed by (seed, member_index), so any member can be
    reproduced without drawing the ones before it. Fields are visited in
    the canonical field order; a field with a range consumes one uniform
    draw per age group (groups in order), fields without a range consume
    nothing and keep their base values.
    """
    if seed < 0:
        raise ValidationError("seed must be >= 0")
    if member_index < 0:
        raise ValidationError("member_index must be >= 0")
    rng = np.random.Generator(np.random.Philox(key=[seed, member_index]))
    by_field = {r.field: r for r in ranges}
    num_groups = base.num_groups
    fields = {}
    for name in PARAMETER_FIELDS:
        spec = by_field.get(name)
        if spec is None:
            fields[name] = getattr(base, name)
            continue
        low, high = spec.resolve(num_groups)
        draw = rng.random(num_groups)
        fields[name] = low + draw * (high - low)
    return EpiParameters(**fields)


def percentile(values: Sequence[float], q: float) -> float:
    """Percentile with linear interpolation between order statistics.

    With n sorted values the q-th percentile sits at fractional rank
    (n - 1) * q / 100 and interpolates linearly between the two
    neighbouring values.
    """
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        raise ValidationError("percentile of an empty sample is undefined")
    if not 0.0 <= q <= 100.0:
        raise ValidationError("percentile must lie in [0, 100]")
    rank = (arr.size - 1) * (q / 100.0)
    lower = math.floor(rank)
    upper = math.ceil(rank)
    weight = rank - lower
    return float(arr[lower] * (1.0 - weight) + arr[upper] * weight)


@dataclass(frozen=True)
class Trend:
    """Direction of a median curve relative to its simulation start."""

    direction: str  # "increasing" | "decreasing" | "stable"
    change: float | None  # relative change of the median; None when start is 0


def classify_trend(start: float, current: float) -> Trend:
    """Compare a median value against its day-0 baseline."""
    if start == 0.0:
        if current > 0.0:
            return Trend("increasing", None)
        return Trend("stable", None)
    change = (current - start) / start
    if abs(change) < STABLE_THRESHOLD:
        return Trend("stable", change)
    return Trend("increasing" if change > 0 else "decreasing", change)


@dataclass(frozen=True)
class SimulationResult:
    """Percentile bands of an ensemble run.

    values:
        Shape (percentiles, districts + 1, days + 1, groups + 1,
        compartments). The district axis starts with the national
        aggregate (id ``"00000"``); the group axis ends with the all-ages
        aggregate (label ``"total"``). Both aggregates were summed per
        ensemble member before the percentiles were taken.
    """

    scenario_id: str
    district_ids: tuple[str, ...]
    group_labels: tuple[str, ...]
    num_days: int
    num_members: int
    seed: int
    values: np.ndarray
    percentiles: tuple[int, ...] = PERCENTILES
    start_date: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "district_ids", tuple(self.district_ids))
        object.__setattr__(self, "group_labels", tuple(self.group_labels))
        object.__setattr__(self, "percentiles", tuple(int(p) for p in self.percentiles))
        expected = (
            len(self.percentiles),
            len(self.district_ids),
            self.num_days + 1,
            len(self.group_labels),
            NUM_COMPARTMENTS,
        )
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != expected:
            raise ValidationError(
                f"result values must have shape {expected}, got {arr.shape}"
            )
        object.__setattr__(self, "values", arr)
        if self.district_ids[0] != NATIONAL_ID:
            raise ValidationError(
                f"district axis must start with the national row {NATIONAL_ID!r}"
            )
        if self.group_labels[-1] != TOTAL_GROUP:
            raise ValidationError(
                f"group axis must end with the aggregate row {TOTAL_GROUP!r}"
            )

    def percentile_index(self, q: int) -> int:
        try:
            return self.percentiles.index(q)
        except ValueError:
            raise ValidationError(
                f"percentile {q} not stored (have {self.percentiles})"
            ) from None

    def district_index(self, district_id: str) -> int:
        try:
            return self.district_ids.index(district_id)
        except ValueError:
            raise ValidationError(f"unknown district {district_id!r}") from None

    def group_index(self, label: str) -> int:
        try:
            return self.group_labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown age group {label!r}") from None

    def series(
        self,
        q: int,
        compartment: Compartment | str,
        district_id: str = NATIONAL_ID,
        group: str = TOTAL_GROUP,
    ) -> np.ndarray:
        """Day-indexed curve for one percentile, shape (num_days + 1,)."""
        comp = (
            Compartment.from_code(compartment)
            if isinstance(compartment, str) else compartment
        )
        return self.values[
            self.percentile_index(q),
            self.district_index(district_id),
            :,
            self.group_index(group),
            comp,
        ]

    def trend(
        self,
        compartment: Compartment | str,
        day: int,
        district_id: str = NATIONAL_ID,
        group: str = TOTAL_GROUP,
    ) -> Trend:
        """Trend of the median curve at ``day`` versus day 0."""
        if not 0 <= day <= self.num_days:
            raise ValidationError(f"day must lie in [0, {self.num_days}]")
        median = self.series(50, compartment, district_id, group)
        return classify_trend(float(median[0]), float(median[day]))


def _with_aggregates(trajectory: np.ndarray) -> np.ndarray:
    """(days, districts, groups, compartments) with sum rows prepended/appended.

    Returns (districts + 1, days, groups + 1, compartments): the national
    sum leads the district axis, the all-ages sum trails the group axis.
    """
    by_district = np.moveaxis(trajectory, 0, 1)
    national = by_district.sum(axis=0, keepdims=True)
    extended = np.concatenate([national, by_district], axis=0)
    totals = extended.sum(axis=2, keepdims=True)
    return np.concatenate([extended, totals], axis=2)


def run_ensemble(
    graph: GraphModel,
    scenario: ScenarioDefinition,
    num_members: int | None = None,
    num_days: int | None = None,
    seed: int | None = None,
    dt: float = DEFAULT_DT,
    start_date: str | None = None,
) -> SimulationResult:
    """Run a scenario's ensemble and reduce it to percentile bands.

    Every member draws its parameters from the scenario's ranges (around
    the graph's shared parameter set), runs the full metapopulation
    simulation under the scenario's damping schedule and is then summed
    into national and all-ages aggregates. Percentiles are taken across
    members afterwards, pointwise per (district, day, group, compartment).
    """
    members = scenario.num_members if num_members is None else num_members
    days = scenario.num_days if num_days is None else num_days
    run_seed = scenario.seed if seed is None else seed
    if members < 1:
        raise ValidationError("num_members must be >= 1")
    if days < 1:
        raise ValidationError("num_days must be >= 1")

    num_districts = graph.num_districts
    num_groups = graph.age_groups.size
    stacked = np.empty(
        (members, num_districts + 1, days + 1, num_groups + 1, NUM_COMPARTMENTS)
    )
    for member in range(members):
        params = sample_parameters(graph.parameters, scenario.ranges, run_seed, member)
        member_graph = replace(graph, parameters=params)
        trajectory = simulate_graph(
            member_graph, num_days=days, dt=dt, dampings=scenario.dampings
        )
        stacked[member] = _with_aggregates(trajectory.values)

    values = np.percentile(stacked, PERCENTILES, axis=0)
    return SimulationResult(
        scenario_id=scenario.id,
        district_ids=(NATIONAL_ID,) + graph.district_ids,
        group_labels=graph.age_groups.labels + (TOTAL_GROUP,),
        num_days=days,
        num_members=members,
        seed=run_seed,
        values=values,
        start_date=start_date,
    )
