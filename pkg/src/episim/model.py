"""Age-stratified SECIR-type compartment model for a single district.

The infection chain runs

    susceptible -> exposed -> carrier -> symptomatic -> severe -> critical

where "carrier" means infectious without symptoms. Every infectious stage
branches into recovery, and the critical stage additionally branches into
death, so the eight compartments form a closed system: per age group the
compartment sum is an invariant of the dynamics.

Contact behaviour is split over the four locations home, school, work and
other. Interventions are expressed as dampings: fractional reductions of
the contact rates of selected locations (and optionally selected age
groups) over an interval of days. Overlapping dampings compose
multiplicatively, which keeps the result order-independent and within
[0, 1] of the undamped rate.

Integration uses the classical fixed-step fourth-order Runge-Kutta scheme
with contact matrices frozen per simulated day; trajectories are sampled
at integer days.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import IntegrationError, ValidationError, ZeroPopulationError

log = logging.getLogger(__name__)

LOCATIONS = ("home", "school", "work", "other")

DEFAULT_DT = 0.1

# Negative round-off produced by a single integration step is clamped to
# zero as long as the clamped mass stays below this fraction of the group
# population; anything larger indicates a genuinely unstable step.
CLAMP_TOLERANCE = 1e-9

_COMPARTMENT_CODES = "SECIHURD"
_COMPARTMENT_LABELS = (
    "Susceptible",
    "Exposed",
    "Infectious non-symptomatic",
    "Infectious symptomatic",
    "Infected Severe",
    "Infectious Critical",
    "Recovered",
    "Dead",
)


class Compartment(enum.IntEnum):
    """The eight infection states, in canonical order."""

    SUSCEPTIBLE = 0
    EXPOSED = 1
    CARRIER = 2
    INFECTED = 3
    SEVERE = 4
    CRITICAL = 5
    RECOVERED = 6
    DEAD = 7

    @property
    def code(self) -> str:
        """Single-letter code used in interchange formats."""
        return _COMPARTMENT_CODES[self.value]

    @property
    def label(self) -> str:
        """Human-readable display name."""
        return _COMPARTMENT_LABELS[self.value]

    @classmethod
    def from_code(cls, code: str) -> "Compartment":
        idx = _COMPARTMENT_CODES.find(code)
        if idx < 0:
            raise ValidationError(f"unknown compartment code {code!r}")
        return cls(idx)


NUM_COMPARTMENTS = len(Compartment)

COMPARTMENT_CODES = tuple(c.code for c in Compartment)


@dataclass(frozen=True)
class AgeBand:
    """One age group: a label plus its age bounds in years.

    ``upper`` is exclusive; ``None`` marks an open-ended top band.
    """

    label: str
    lower: int
    upper: int | None = None

    def __post_init__(self) -> None:
        if not self.label:
            raise ValidationError("age band label must be non-empty")
        if self.lower < 0:
            raise ValidationError(f"age band {self.label!r}: lower bound must be >= 0")
        if self.upper is not None and self.upper <= self.lower:
            raise ValidationError(
                f"age band {self.label!r}: upper bound must exceed lower bound"
            )


@dataclass(frozen=True)
class AgeGroups:
    """Ordered, non-overlapping age stratification."""

    bands: tuple[AgeBand, ...]

    def __post_init__(self) -> None:
        bands = tuple(self.bands)
        object.__setattr__(self, "bands", bands)
        if not bands:
            raise ValidationError("at least one age group is required")
        labels = [b.label for b in bands]
        if len(set(labels)) != len(labels):
            raise ValidationError("age group labels must be unique")
        for prev, cur in zip(bands, bands[1:]):
            if prev.upper is None:
                raise ValidationError(
                    f"age band {prev.label!r}: only the last band may be open-ended"
                )
            if cur.lower < prev.upper:
                raise ValidationError(
                    f"age bands {prev.label!r} and {cur.label!r} overlap or descend"
                )

    @property
    def size(self) -> int:
        return len(self.bands)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.bands)

    def index(self, label: str) -> int:
        for i, band in enumerate(self.bands):
            if band.label == label:
                return i
        raise ValidationError(f"unknown age group {label!r}")

    def to_dicts(self) -> list[dict]:
        return [
            {"label": b.label, "lower": b.lower, "upper": b.upper} for b in self.bands
        ]

    @classmethod
    def from_dicts(cls, items: Iterable[Mapping]) -> "AgeGroups":
        return cls(
            tuple(
                AgeBand(str(d["label"]), int(d["lower"]),
                        None if d.get("upper") is None else int(d["upper"]))
                for d in items
            )
        )


def _as_readonly(values, shape, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != shape:
        raise ValidationError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: values must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CompartmentTensor:
    """Nonnegative person counts per (age group, compartment)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != NUM_COMPARTMENTS:
            raise ValidationError(
                f"compartment tensor must have shape (groups, {NUM_COMPARTMENTS}),"
                f" got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("compartment tensor entries must be finite")
        if np.any(arr < 0):
            raise ValidationError("compartment tensor entries must be >= 0")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, num_groups: int) -> "CompartmentTensor":
        return cls(np.zeros((num_groups, NUM_COMPARTMENTS)))

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[float]], num_groups: int) -> "CompartmentTensor":
        """Build from a mapping of compartment code to per-group counts."""
        arr = np.zeros((num_groups, NUM_COMPARTMENTS))
        for code, column in data.items():
            arr[:, Compartment.from_code(code)] = np.asarray(column, dtype=np.float64)
        return cls(arr)

    def to_dict(self) -> dict[str, list[float]]:
        return {c.code: self.values[:, c].tolist() for c in Compartment}

    @property
    def num_groups(self) -> int:
        return self.values.shape[0]

    def group_totals(self) -> np.ndarray:
        """Total persons per age group, including the dead."""
        return self.values.sum(axis=1)

    def living(self) -> np.ndarray:
        """Persons per age group excluding the dead."""
        return self.group_totals() - self.values[:, Compartment.DEAD]


# Parameter fields in canonical order. The order is part of the package
# contract: ensemble sampling draws fields in exactly this order.
PARAMETER_FIELDS = (
    "transmission_prob",
    "symptomatic_infectiousness",
    "latent_time",
    "carrier_time",
    "symptomatic_time",
    "severe_time",
    "critical_time",
    "symptomatic_fraction",
    "severe_fraction",
    "critical_fraction",
    "fatal_fraction",
)

DURATION_FIELDS = (
    "latent_time",
    "carrier_time",
    "symptomatic_time",
    "severe_time",
    "critical_time",
)

PROBABILITY_FIELDS = (
    "symptomatic_infectiousness",
    "symptomatic_fraction",
    "severe_fraction",
    "critical_fraction",
    "fatal_fraction",
)


@dataclass(frozen=True)
class EpiParameters:
    """Per-age-group disease parameters.

    transmission_prob:
        Transmission scaling per contact (>= 0).
    symptomatic_infectiousness:
        Weight of the symptomatic compartment in the force of infection,
        relative to carriers, in [0, 1].
    latent_time, carrier_time, symptomatic_time, severe_time, critical_time:
        Mean stay times in days for E, C, I, H and U; strictly positive.
    symptomatic_fraction, severe_fraction, critical_fraction, fatal_fraction:
        Stage progression probabilities C->I, I->H, H->U and U->D in [0, 1];
        the complement of each recovers.
    """

    transmission_prob: np.ndarray
    symptomatic_infectiousness: np.ndarray
    latent_time: np.ndarray
    carrier_time: np.ndarray
    symptomatic_time: np.ndarray
    severe_time: np.ndarray
    critical_time: np.ndarray
    symptomatic_fraction: np.ndarray
    severe_fraction: np.ndarray
    critical_fraction: np.ndarray
    fatal_fraction: np.ndarray

    def __post_init__(self) -> None:
        first = np.atleast_1d(np.asarray(getattr(self, PARAMETER_FIELDS[0]), dtype=np.float64))
        shape = first.shape
        if first.ndim != 1 or shape[0] < 1:
            raise ValidationError("parameters must be one value per age group")
        for name in PARAMETER_FIELDS:
            arr = _as_readonly(np.atleast_1d(getattr(self, name)), shape, name)
            object.__setattr__(self, name, arr)
        for name in DURATION_FIELDS:
            if np.any(getattr(self, name) <= 0):
                raise ValidationError(f"{name}: durations must be > 0 days")
        for name in PROBABILITY_FIELDS:
            arr = getattr(self, name)
            if np.any((arr < 0) | (arr > 1)):
                raise ValidationError(f"{name}: probabilities must lie in [0, 1]")
        if np.any(self.transmission_prob < 0):
            raise ValidationError("transmission_prob: must be >= 0")

    @property
    def num_groups(self) -> int:
        return self.transmission_prob.shape[0]

    @classmethod
    def from_scalars(cls, num_groups: int, **fields: float) -> "EpiParameters":
        """Broadcast scalar values to every age group."""
        missing = set(PARAMETER_FIELDS) - set(fields)
        extra = set(fields) - set(PARAMETER_FIELDS)
        if missing or extra:
            raise ValidationError(
                f"parameter fields mismatch (missing: {sorted(missing)}, unknown: {sorted(extra)})"
            )
        return cls(**{
            name: np.full(num_groups, float(value)) for name, value in fields.items()
        })

    def to_dict(self) -> dict[str, list[float]]:
        return {name: getattr(self, name).tolist() for name in PARAMETER_FIELDS}

    @classmethod
    def from_dict(cls, data: Mapping, num_groups: int) -> "EpiParameters":
        values = {}
        for name in PARAMETER_FIELDS:
            if name not in data:
                raise ValidationError(f"missing parameter field {name!r}")
            raw = data[name]
            if np.isscalar(raw):
                values[name] = np.full(num_groups, float(raw))
            else:
                values[name] = np.asarray(raw, dtype=np.float64)
        return cls(**values)


@dataclass(frozen=True)
class ContactMatrices:
    """Daily contact rates per location, each matrix age x age."""

    home: np.ndarray
    school: np.ndarray
    work: np.ndarray
    other: np.ndarray

    def __post_init__(self) -> None:
        side = np.asarray(self.home).shape[0] if np.asarray(self.home).ndim == 2 else -1
        for name in LOCATIONS:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise ValidationError(f"contact matrix {name!r} must be square")
            arr = _as_readonly(arr, (side, side), f"contact matrix {name!r}")
            if np.any(arr < 0):
                raise ValidationError(f"contact matrix {name!r} must be >= 0")
            object.__setattr__(self, name, arr)

    @property
    def num_groups(self) -> int:
        return self.home.shape[0]

    def location(self, name: str) -> np.ndarray:
        if name not in LOCATIONS:
            raise ValidationError(f"unknown contact location {name!r}")
        return getattr(self, name)

    def total(self) -> np.ndarray:
        """Undamped sum over all four locations."""
        return self.home + self.school + self.work + self.other

    def to_dict(self) -> dict[str, list[list[float]]]:
        return {name: getattr(self, name).tolist() for name in LOCATIONS}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ContactMatrices":
        try:
            return cls(**{name: np.asarray(data[name], dtype=np.float64) for name in LOCATIONS})
        except KeyError as exc:
            raise ValidationError(f"missing contact matrix for location {exc.args[0]!r}") from exc


@dataclass(frozen=True)
class Damping:
    """A contact-reduction intervention.

    ``strength`` is the fraction of contacts removed while the damping is
    active on ``[start_day, end_day)``. ``locations`` selects which of the
    four contact locations are affected; ``groups`` optionally restricts
    the reduction to matrix entries that involve one of the listed age
    group indices (either as contactor or contactee).
    """

    strength: float
    start_day: int
    end_day: int
    locations: tuple[str, ...] = LOCATIONS
    groups: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "locations", tuple(self.locations))
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(int(g) for g in self.groups))
        if not 0.0 <= self.strength <= 1.0:
            raise ValidationError(
                f"damping strength must be within [0, 1], got {self.strength}"
            )
        if self.start_day < 0:
            raise ValidationError("damping start_day must be >= 0")
        if self.end_day <= self.start_day:
            raise ValidationError("damping end_day must be greater than start_day")
        if not self.locations:
            raise ValidationError("damping must name at least one location")
        for loc in self.locations:
            if loc not in LOCATIONS:
                raise ValidationError(f"unknown contact location {loc!r}")
        if self.groups is not None and len(self.groups) == 0:
            raise ValidationError("damping group mask must be None or non-empty")

    def active_on(self, day: int) -> bool:
        return self.start_day <= day < self.end_day

    def to_dict(self) -> dict:
        data = {
            "strength": self.strength,
            "start_day": self.start_day,
            "end_day": self.end_day,
            "locations": list(self.locations),
        }
        if self.groups is not None:
            data["groups"] = list(self.groups)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "Damping":
        try:
            return cls(
                strength=float(data["strength"]),
                start_day=int(data["start_day"]),
                end_day=int(data["end_day"]),
                locations=tuple(data.get("locations", LOCATIONS)),
                groups=None if data.get("groups") is None else tuple(data["groups"]),
            )
        except KeyError as exc:
            raise ValidationError(f"damping is missing field {exc.args[0]!r}") from exc


def effective_contacts(
    base: ContactMatrices,
    dampings: Sequence[Damping],
    day: int,
) -> np.ndarray:
    """Summed contact matrix on ``day`` with all active dampings applied.

    Per location, every damping active on ``day`` multiplies the affected
    entries by (1 - strength); the four damped matrices are then summed.
    An entry (a, b) is affected when either a or b is in the damping's
    group mask.
    """
    if day < 0:
        raise ValidationError("day must be >= 0")
    num_groups = base.num_groups
    active = [d for d in dampings if d.active_on(day)]
    total = np.zeros((num_groups, num_groups))
    for loc in LOCATIONS:
        matrix = base.location(loc).copy()
        for damping in active:
            if loc not in damping.locations:
                continue
            if damping.groups is None:
                matrix *= 1.0 - damping.strength
            else:
                involved = np.zeros(num_groups, dtype=bool)
                involved[list(damping.groups)] = True
                mask = involved[:, None] | involved[None, :]
                matrix[mask] *= 1.0 - damping.strength
        total += matrix
    return total


class _ParamStack:
    """Parameter fields stacked to (districts, groups) arrays."""

    __slots__ = PARAMETER_FIELDS

    @classmethod
    def of(cls, params: Sequence[EpiParameters]) -> "_ParamStack":
        stack = cls()
        for name in PARAMETER_FIELDS:
            setattr(stack, name, np.stack([getattr(p, name) for p in params]))
        return stack


def _force_batch(states: np.ndarray, p: _ParamStack, contacts: np.ndarray) -> np.ndarray:
    """Force of infection for a batch of districts.

    states: (D, G, C), contacts: (D, G, G); returns lambda with shape (D, G).
    """
    living = states.sum(axis=-1) - states[..., Compartment.DEAD]
    infectious = (
        states[..., Compartment.CARRIER]
        + p.symptomatic_infectiousness * states[..., Compartment.INFECTED]
    )
    # Mixing with an empty group is undefined; only groups that some
    # contact entry actually points at need a living population.
    contacted = contacts.max(axis=1) > 0.0
    empty = living <= 0.0
    if np.any(contacted & empty):
        d, g = np.argwhere(contacted & empty)[0]
        raise ZeroPopulationError(
            f"living population of group {g} is zero but its contact rate is positive"
            + (f" (district index {d})" if states.shape[0] > 1 else "")
        )
    weights = np.divide(
        infectious, living, out=np.zeros_like(infectious), where=living > 0.0
    )
    # einsum keeps a fixed summation order, so results do not depend on
    # the batch size (a 1-district batch matches any larger batch bitwise).
    return p.transmission_prob * np.einsum("dab,db->da", contacts, weights)


def _rhs_batch(states: np.ndarray, p: _ParamStack, contacts: np.ndarray) -> np.ndarray:
    lam = _force_batch(states, p, contacts)
    s = states[..., Compartment.SUSCEPTIBLE]
    leave_e = states[..., Compartment.EXPOSED] / p.latent_time
    leave_c = states[..., Compartment.CARRIER] / p.carrier_time
    leave_i = states[..., Compartment.INFECTED] / p.symptomatic_time
    leave_h = states[..., Compartment.SEVERE] / p.severe_time
    leave_u = states[..., Compartment.CRITICAL] / p.critical_time
    new_exposed = lam * s

    out = np.empty_like(states)
    out[..., Compartment.SUSCEPTIBLE] = -new_exposed
    out[..., Compartment.EXPOSED] = new_exposed - leave_e
    out[..., Compartment.CARRIER] = leave_e - leave_c
    out[..., Compartment.INFECTED] = p.symptomatic_fraction * leave_c - leave_i
    out[..., Compartment.SEVERE] = p.severe_fraction * leave_i - leave_h
    out[..., Compartment.CRITICAL] = p.critical_fraction * leave_h - leave_u
    out[..., Compartment.DEAD] = p.fatal_fraction * leave_u
    out[..., Compartment.RECOVERED] = (
        (1.0 - p.symptomatic_fraction) * leave_c
        + (1.0 - p.severe_fraction) * leave_i
        + (1.0 - p.critical_fraction) * leave_h
        + (1.0 - p.fatal_fraction) * leave_u
    )
    return out


def _check_contacts(contacts, num_groups: int) -> np.ndarray:
    arr = np.asarray(contacts, dtype=np.float64)
    if arr.shape != (num_groups, num_groups):
        raise ValidationError(
            f"contact matrix must have shape ({num_groups}, {num_groups}), got {arr.shape}"
        )
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValidationError("contact matrix entries must be finite and >= 0")
    return arr


def force_of_infection(
    state: CompartmentTensor, params: EpiParameters, contacts
) -> np.ndarray:
    """Per-age-group infection rate (1/day).

    lambda_a = transmission_prob_a * sum_b contacts[a, b]
               * (C_b + symptomatic_infectiousness_b * I_b) / N_b

    with N_b the living population of group b (the dead do not mix).
    """
    arr = _check_contacts(contacts, state.num_groups)
    return _force_batch(state.values[None], _ParamStack.of([params]), arr[None])[0]


def rhs(state: CompartmentTensor, params: EpiParameters, contacts) -> np.ndarray:
    """Time derivative of all compartments, in persons/day.

    The flows follow the infection chain with branching into recovery at
    every infectious stage; per age group the eight derivatives sum to
    zero up to rounding.
    """
    arr = _check_contacts(contacts, state.num_groups)
    return _rhs_batch(state.values[None], _ParamStack.of([params]), arr[None])[0]


def step_rk4(
    values: np.ndarray,
    deriv: Callable[[np.ndarray], np.ndarray],
    dt: float,
    *,
    clamp_tol: float = CLAMP_TOLERANCE,
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step.

    Works on arrays of shape (..., compartments). Negative round-off in
    the result is clamped to zero; if the clamped mass of any group
    exceeds ``clamp_tol`` times its population the step fails instead of
    silently losing conservation.
    """
    if dt <= 0:
        raise ValidationError("dt must be > 0")
    v = np.asarray(values, dtype=np.float64)
    k1 = np.asarray(deriv(v), dtype=np.float64)
    k2 = np.asarray(deriv(v + (0.5 * dt) * k1), dtype=np.float64)
    k3 = np.asarray(deriv(v + (0.5 * dt) * k2), dtype=np.float64)
    k4 = np.asarray(deriv(v + dt * k3), dtype=np.float64)
    updated = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(updated)):
        bad = np.argwhere(~np.isfinite(updated))
        raise IntegrationError(
            f"non-finite integration update at (group, compartment) indices "
            f"{[tuple(int(i) for i in idx[-2:]) for idx in bad[:4]]}"
        )
    negative = np.minimum(updated, 0.0)
    clamped = -negative.sum(axis=-1)
    if np.any(clamped > 0.0):
        population = v.sum(axis=-1)
        excessive = clamped > clamp_tol * population
        if np.any(excessive):
            idx = tuple(int(i) for i in np.argwhere(excessive)[0])
            raise IntegrationError(
                f"clamped mass {float(clamped[idx]):.3e} exceeds tolerance for group index {idx}"
            )
        log.debug("clamped %.3e persons of integration round-off", float(clamped.sum()))
        updated = np.maximum(updated, 0.0)
    return updated


def steps_per_day(dt: float) -> int:
    """Number of integration steps per day; dt must divide one day evenly."""
    if dt <= 0:
        raise ValidationError("dt must be > 0")
    steps = round(1.0 / dt)
    if steps < 1 or abs(steps * dt - 1.0) > 1e-9:
        raise ValidationError(f"dt={dt} does not divide 1.0 day evenly")
    return steps


def _integrate_day(
    states: np.ndarray,
    params: _ParamStack,
    contacts: np.ndarray,
    steps: int,
    dt: float,
) -> np.ndarray:
    """Advance a (D, G, C) batch by one day with frozen contacts."""

    def f(v: np.ndarray) -> np.ndarray:
        return _rhs_batch(v, params, contacts)

    for _ in range(steps):
        states = step_rk4(states, f, dt)
    return states


def simulate_node(
    initial: CompartmentTensor,
    params: EpiParameters,
    contacts: ContactMatrices,
    dampings: Sequence[Damping] = (),
    num_days: int = 1,
    dt: float = DEFAULT_DT,
) -> np.ndarray:
    """Simulate one district and sample the state at integer days.

    Returns an array of shape (num_days + 1, groups, compartments) whose
    day-0 slice equals ``initial``. Contact matrices are re-evaluated
    against the damping schedule once per day and held fixed within it.
    """
    if num_days < 1:
        raise ValidationError("num_days must be >= 1")
    if initial.num_groups != params.num_groups or initial.num_groups != contacts.num_groups:
        raise ValidationError("initial state, parameters and contacts disagree on group count")
    steps = steps_per_day(dt)
    stack = _ParamStack.of([params])
    states = initial.values[None].copy()
    trajectory = np.empty((num_days + 1,) + initial.values.shape)
    trajectory[0] = states[0]
    for day in range(num_days):
        matrix = effective_contacts(contacts, dampings, day)[None]
        try:
            states = _integrate_day(states, stack, matrix, steps, dt)
        except (IntegrationError, ZeroPopulationError) as exc:
            raise type(exc)(f"day {day}: {exc}") from exc
        trajectory[day + 1] = states[0]
    return trajectory
