"""Persistence: result interchange format, case data and the catalog.

A simulation result is stored as a directory with two files:

``metadata.json``
    Axis labels and run provenance (scenario id, percentile list,
    district ids, group labels, compartment codes, day count, member
    count, seed, optional calendar date of day 0).

``results.ndjson``
    One JSON object per line, one line per (percentile, district, day),
    national aggregate row included. Each line carries a value block of
    (groups + 1) x compartments numbers, with the all-ages aggregate row
    last. Files are UTF-8 with LF line endings, and floats are written
    with full repr precision, so a load after a save reproduces the
    array bit for bit.

Reported case data arrives as CSV with the exact header
``date,county_id,age_group,confirmed,deaths,recovered``; rows are
validated individually and errors cite their line number. Records are
keyed by (date, district, group) and re-ingesting a file is idempotent.

The :class:`Store` keeps everything under one root directory:
scenario definitions, a copy of each scenario's graph (so the store is
self-contained), result directories and the ingested case table.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ensemble import ScenarioDefinition, SimulationResult
from .errors import FormatError, ValidationError
from .graph import GraphModel, load_graph, save_graph
from .model import COMPARTMENT_CODES, Compartment, CompartmentTensor, NUM_COMPARTMENTS

log = logging.getLogger(__name__)

RESULT_FORMAT = "episim-result"
RESULT_VERSION = 1

CASE_CSV_HEADER = ("date", "county_id", "age_group", "confirmed", "deaths", "recovered")

_METADATA_FIELDS = (
    "format", "version", "scenario_id", "percentiles", "district_ids",
    "group_labels", "compartments", "num_days", "num_members", "seed",
)


def _result_metadata(result: SimulationResult) -> dict:
    return {
        "format": RESULT_FORMAT,
        "version": RESULT_VERSION,
        "scenario_id": result.scenario_id,
        "percentiles": list(result.percentiles),
        "district_ids": list(result.district_ids),
        "group_labels": list(result.group_labels),
        "compartments": list(COMPARTMENT_CODES),
        "num_days": result.num_days,
        "num_members": result.num_members,
        "seed": result.seed,
        "start_date": result.start_date,
    }


def save_result(result: SimulationResult, directory: str | Path) -> Path:
    """Write a result directory; returns its path.

    Lines are ordered percentile-major, then district, then day; loaders
    must not rely on that order, only on completeness.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "metadata.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_result_metadata(result), fh, indent=2)
        fh.write("\n")
    with open(directory / "results.ndjson", "w", encoding="utf-8", newline="\n") as fh:
        for p_idx, q in enumerate(result.percentiles):
            for d_idx, district in enumerate(result.district_ids):
                for day in range(result.num_days + 1):
                    record = {
                        "percentile": q,
                        "district": district,
                        "day": day,
                        "values": result.values[p_idx, d_idx, day].tolist(),
                    }
                    fh.write(json.dumps(record, separators=(",", ":")))
                    fh.write("\n")
    return directory


def _read_metadata(directory: Path, problems: list[str]) -> dict | None:
    path = directory / "metadata.json"
    if not path.is_file():
        problems.append("metadata.json is missing")
        return None
    try:
        metadata = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        problems.append(f"metadata.json is unreadable: {exc}")
        return None
    if not isinstance(metadata, dict):
        problems.append("metadata.json must hold a JSON object")
        return None
    for field in _METADATA_FIELDS:
        if field not in metadata:
            problems.append(f"metadata.json is missing field {field!r}")
    if problems:
        return None
    if metadata["format"] != RESULT_FORMAT:
        problems.append(f"unknown format {metadata['format']!r}")
    percentiles = metadata["percentiles"]
    if (
        not isinstance(percentiles, list)
        or not all(isinstance(p, int) for p in percentiles)
        or sorted(set(percentiles)) != percentiles
        or not percentiles
        or percentiles[0] < 0 or percentiles[-1] > 100
    ):
        problems.append("percentiles must be strictly increasing integers in [0, 100]")
    if metadata["compartments"] != list(COMPARTMENT_CODES):
        problems.append(
            f"compartments must be {list(COMPARTMENT_CODES)}, got {metadata['compartments']}"
        )
    if not isinstance(metadata["num_days"], int) or metadata["num_days"] < 1:
        problems.append("num_days must be a positive integer")
    return None if problems else metadata


def _scan_records(directory: Path, metadata: dict, problems: list[str]):
    """Parse results.ndjson; returns (values, seen) or None."""
    path = directory / "results.ndjson"
    if not path.is_file():
        problems.append("results.ndjson is missing")
        return None
    percentiles = list(metadata["percentiles"])
    district_ids = list(metadata["district_ids"])
    group_labels = list(metadata["group_labels"])
    num_days = metadata["num_days"]
    shape = (len(percentiles), len(district_ids), num_days + 1,
             len(group_labels), NUM_COMPARTMENTS)
    values = np.zeros(shape)
    seen = np.zeros(shape[:3], dtype=bool)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                problems.append(f"results.ndjson line {lineno}: blank line")
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"results.ndjson line {lineno}: invalid JSON ({exc.msg})")
                continue
            try:
                q = record["percentile"]
                district = record["district"]
                day = record["day"]
                block = record["values"]
            except (TypeError, KeyError):
                problems.append(
                    f"results.ndjson line {lineno}: needs percentile, district, day, values"
                )
                continue
            if q not in percentiles:
                problems.append(f"results.ndjson line {lineno}: unknown percentile {q!r}")
                continue
            if district not in district_ids:
                problems.append(f"results.ndjson line {lineno}: unknown district {district!r}")
                continue
            if not isinstance(day, int) or not 0 <= day <= num_days:
                problems.append(f"results.ndjson line {lineno}: day {day!r} out of range")
                continue
            block_arr = np.asarray(block, dtype=object)
            try:
                block_arr = block_arr.astype(np.float64)
            except (TypeError, ValueError):
                problems.append(f"results.ndjson line {lineno}: non-numeric values")
                continue
            if block_arr.shape != (len(group_labels), NUM_COMPARTMENTS):
                problems.append(
                    f"results.ndjson line {lineno}: value block must be "
                    f"{len(group_labels)}x{NUM_COMPARTMENTS}, got {block_arr.shape}"
                )
                continue
            if not np.all(np.isfinite(block_arr)):
                problems.append(f"results.ndjson line {lineno}: non-finite values")
                continue
            key = (percentiles.index(q), district_ids.index(district), day)
            if seen[key]:
                problems.append(
                    f"results.ndjson line {lineno}: duplicate record for "
                    f"percentile {q}, district {district}, day {day}"
                )
                continue
            seen[key] = True
            values[key] = block_arr
    missing = np.argwhere(~seen)
    for p_idx, d_idx, day in missing[:20]:
        problems.append(
            f"missing record for percentile {percentiles[p_idx]}, "
            f"district {district_ids[d_idx]}, day {day}"
        )
    if len(missing) > 20:
        problems.append(f"... and {len(missing) - 20} more missing records")
    return values, seen


def validate_format(directory: str | Path) -> list[str]:
    """Check a result directory; returns a list of problems (empty = valid).

    Checks are limited to what the format itself promises: readable
    schema, complete coverage of every (percentile, district, day),
    nonnegative finite values and percentile bands that do not cross.
    """
    directory = Path(directory)
    problems: list[str] = []
    if not directory.is_dir():
        return [f"{directory} is not a directory"]
    metadata = _read_metadata(directory, problems)
    if metadata is None:
        return problems
    scanned = _scan_records(directory, metadata, problems)
    if scanned is None:
        return problems
    values, seen = scanned
    if not np.all(seen):
        return problems

    negative = np.argwhere(values < 0)
    for idx in negative[:20]:
        p_idx, d_idx, day, g_idx, c_idx = (int(i) for i in idx)
        problems.append(
            f"negative value at percentile {metadata['percentiles'][p_idx]}, "
            f"district {metadata['district_ids'][d_idx]}, day {day}, "
            f"group {metadata['group_labels'][g_idx]}, "
            f"compartment {COMPARTMENT_CODES[c_idx]}"
        )
    if len(negative) > 20:
        problems.append(f"... and {len(negative) - 20} more negative values")

    crossings = np.argwhere(np.diff(values, axis=0) < 0)
    for idx in crossings[:20]:
        p_idx, d_idx, day, g_idx, c_idx = (int(i) for i in idx)
        problems.append(
            "percentile bands cross between "
            f"p{metadata['percentiles'][p_idx]} and p{metadata['percentiles'][p_idx + 1]} "
            f"at district {metadata['district_ids'][d_idx]}, day {day}, "
            f"group {metadata['group_labels'][g_idx]}, "
            f"compartment {COMPARTMENT_CODES[c_idx]}"
        )
    if len(crossings) > 20:
        problems.append(f"... and {len(crossings) - 20} more band crossings")
    return problems


def load_result(directory: str | Path) -> SimulationResult:
    """Read a result directory back into a :class:`SimulationResult`."""
    directory = Path(directory)
    problems: list[str] = []
    if not directory.is_dir():
        raise FormatError(f"{directory} is not a directory")
    metadata = _read_metadata(directory, problems)
    if metadata is None:
        raise FormatError("; ".join(problems))
    scanned = _scan_records(directory, metadata, problems)
    if scanned is None or problems:
        raise FormatError("; ".join(problems[:10]))
    values, _ = scanned
    try:
        return SimulationResult(
            scenario_id=metadata["scenario_id"],
            district_ids=tuple(metadata["district_ids"]),
            group_labels=tuple(metadata["group_labels"]),
            num_days=metadata["num_days"],
            num_members=metadata["num_members"],
            seed=metadata["seed"],
            values=values,
            percentiles=tuple(metadata["percentiles"]),
            start_date=metadata.get("start_date"),
        )
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


@dataclass(frozen=True)
class CaseRecord:
    """Cumulative reported numbers for one (date, district, age group)."""

    date: str
    district: str
    group: str
    confirmed: int
    deaths: int
    recovered: int

    def __post_init__(self) -> None:
        try:
            dt.date.fromisoformat(self.date)
        except ValueError:
            raise ValidationError(
                f"date {self.date!r} is not an ISO date (YYYY-MM-DD)"
            ) from None
        if not self.district:
            raise ValidationError("district must be non-empty")
        if not self.group:
            raise ValidationError("age group must be non-empty")
        for name in ("confirmed", "deaths", "recovered"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.deaths + self.recovered > self.confirmed:
            raise ValidationError(
                f"deaths + recovered ({self.deaths + self.recovered}) exceed "
                f"confirmed ({self.confirmed})"
            )

    @property
    def active(self) -> int:
        """Confirmed cases that are neither recovered nor deceased."""
        return self.confirmed - self.deaths - self.recovered

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.date, self.district, self.group)

    def to_dict(self) -> dict:
        return {
            "date": self.date,
            "district": self.district,
            "group": self.group,
            "confirmed": self.confirmed,
            "deaths": self.deaths,
            "recovered": self.recovered,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CaseRecord":
        return cls(
            date=str(data["date"]),
            district=str(data["district"]),
            group=str(data["group"]),
            confirmed=int(data["confirmed"]),
            deaths=int(data["deaths"]),
            recovered=int(data["recovered"]),
        )


def parse_case_csv(path: str | Path) -> list[CaseRecord]:
    """Parse a case CSV; duplicate keys within the file keep the last row.

    All row-level problems are collected and raised together, each with
    its 1-based line number.
    """
    path = Path(path)
    problems: list[str] = []
    by_key: dict[tuple[str, str, str], CaseRecord] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: file is empty, expected a header row") from None
        if tuple(header) != CASE_CSV_HEADER:
            raise ValidationError(
                f"{path}: header must be exactly {','.join(CASE_CSV_HEADER)!r},"
                f" got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CASE_CSV_HEADER):
                problems.append(
                    f"line {lineno}: expected {len(CASE_CSV_HEADER)} fields, got {len(row)}"
                )
                continue
            date, district, group, confirmed, deaths, recovered = row
            try:
                record = CaseRecord(
                    date=date.strip(),
                    district=district.strip(),
                    group=group.strip(),
                    confirmed=int(confirmed),
                    deaths=int(deaths),
                    recovered=int(recovered),
                )
            except ValidationError as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            except ValueError:
                problems.append(f"line {lineno}: counts must be integers")
                continue
            by_key[record.key] = record
    if problems:
        raise ValidationError(f"{path}:\n" + "\n".join(problems))
    return sorted(by_key.values(), key=lambda r: r.key)


def initialize_from_cases(
    records: Iterable[CaseRecord],
    date: str,
    district: str,
    group_labels: Sequence[str],
    population: Sequence[float],
) -> CompartmentTensor:
    """Compartment start values from reported numbers on one date.

    Deaths and recoveries map directly, the remaining active cases start
    symptomatic, and everyone not yet confirmed is susceptible. Age
    groups without a report are fully susceptible.
    """
    population = np.asarray(population, dtype=np.float64)
    if population.shape != (len(group_labels),):
        raise ValidationError("population must list one value per age group")
    if np.any(population < 0):
        raise ValidationError("population must be >= 0")
    by_group = {
        r.group: r for r in records if r.date == date and r.district == district
    }
    unknown = set(by_group) - set(group_labels)
    if unknown:
        raise ValidationError(
            f"case records use unknown age groups {sorted(unknown)}"
        )
    values = np.zeros((len(group_labels), NUM_COMPARTMENTS))
    for g, label in enumerate(group_labels):
        record = by_group.get(label)
        if record is None:
            values[g, Compartment.SUSCEPTIBLE] = population[g]
            continue
        if record.confirmed > population[g]:
            raise ValidationError(
                f"group {label!r}: confirmed ({record.confirmed}) exceeds "
                f"population ({population[g]:g})"
            )
        values[g, Compartment.SUSCEPTIBLE] = population[g] - record.confirmed
        values[g, Compartment.INFECTED] = record.active
        values[g, Compartment.RECOVERED] = record.recovered
        values[g, Compartment.DEAD] = record.deaths
    return CompartmentTensor(values)


def _normalize(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch)).casefold()


def search_districts(
    districts: Sequence[tuple[str, str]],
    query: str,
    limit: int = 20,
) -> list[tuple[str, str]]:
    """Rank (id, name) pairs against a query.

    Matching ignores case and diacritics. An exact id match ranks first,
    then id or name prefixes, then substrings anywhere; ties resolve by
    name. At most ``limit`` matches are returned.
    """
    needle = _normalize(query.strip())
    if not needle:
        return []
    ranked = []
    for district_id, name in districts:
        nid = _normalize(district_id)
        nname = _normalize(name)
        if nid == needle:
            rank = 0
        elif nid.startswith(needle) or nname.startswith(needle):
            rank = 1
        elif needle in nid or needle in nname:
            rank = 2
        else:
            continue
        ranked.append((rank, nname, district_id, name))
    ranked.sort()
    return [(district_id, name) for _, _, district_id, name in ranked[:limit]]


class Store:
    """File-backed catalog of scenarios, graphs, results and case data."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        for sub in ("scenarios", "graphs", "results", "cases"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    # -- scenarios ----------------------------------------------------

    def _scenario_path(self, scenario_id: str) -> Path:
        return self.root / "scenarios" / f"{scenario_id}.json"

    def _graph_path(self, scenario_id: str) -> Path:
        return self.root / "graphs" / f"{scenario_id}.json"

    def result_path(self, scenario_id: str) -> Path:
        return self.root / "results" / scenario_id

    def add_scenario(
        self,
        scenario: ScenarioDefinition,
        graph: GraphModel,
        overwrite: bool = False,
    ) -> None:
        """Persist a scenario together with its own copy of the graph."""
        path = self._scenario_path(scenario.id)
        if path.exists() and not overwrite:
            raise ValidationError(f"scenario {scenario.id!r} already exists")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(scenario.to_dict(), fh, indent=2)
            fh.write("\n")
        save_graph(graph, self._graph_path(scenario.id))

    def list_scenarios(self) -> list[ScenarioDefinition]:
        scenarios = []
        for path in sorted((self.root / "scenarios").glob("*.json")):
            scenarios.append(self._load_scenario(path))
        return scenarios

    def _load_scenario(self, path: Path) -> ScenarioDefinition:
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from exc
        return ScenarioDefinition.from_dict(data)

    def has_scenario(self, scenario_id: str) -> bool:
        return self._scenario_path(scenario_id).is_file()

    def get_scenario(self, scenario_id: str) -> ScenarioDefinition:
        path = self._scenario_path(scenario_id)
        if not path.is_file():
            raise ValidationError(f"unknown scenario {scenario_id!r}")
        return self._load_scenario(path)

    def get_graph(self, scenario_id: str) -> GraphModel:
        path = self._graph_path(scenario_id)
        if not path.is_file():
            raise ValidationError(f"scenario {scenario_id!r} has no graph")
        return load_graph(path)

    # -- results ------------------------------------------------------

    def save_result(self, result: SimulationResult) -> Path:
        return save_result(result, self.result_path(result.scenario_id))

    def has_result(self, scenario_id: str) -> bool:
        return (self.result_path(scenario_id) / "metadata.json").is_file()

    def load_result(self, scenario_id: str) -> SimulationResult:
        path = self.result_path(scenario_id)
        if not path.is_dir():
            raise ValidationError(f"scenario {scenario_id!r} has no stored result")
        return load_result(path)

    # -- case data ----------------------------------------------------

    @property
    def _case_path(self) -> Path:
        return self.root / "cases" / "records.ndjson"

    def _load_cases(self) -> dict[tuple[str, str, str], CaseRecord]:
        path = self._case_path
        if not path.is_file():
            return {}
        records = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = CaseRecord.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise FormatError(f"{path} line {lineno}: {exc}") from exc
                records[record.key] = record
        return records

    def _write_cases(self, records: dict[tuple[str, str, str], CaseRecord]) -> None:
        with open(self._case_path, "w", encoding="utf-8", newline="\n") as fh:
            for key in sorted(records):
                fh.write(json.dumps(records[key].to_dict(), separators=(",", ":")))
                fh.write("\n")

    def ingest_cases(self, csv_path: str | Path) -> tuple[int, int]:
        """Merge a case CSV into the store; returns (rows read, total stored).

        Existing records with the same (date, district, group) key are
        replaced, so ingesting the same file twice changes nothing.
        """
        incoming = parse_case_csv(csv_path)
        records = self._load_cases()
        for record in incoming:
            records[record.key] = record
        self._write_cases(records)
        return len(incoming), len(records)

    def case_records(self) -> list[CaseRecord]:
        records = self._load_cases()
        return [records[key] for key in sorted(records)]

    def case_series(self, district: str, group: str | None = None) -> list[CaseRecord]:
        """Records for one district, date-ordered, optionally one group."""
        return [
            record
            for key, record in sorted(self._load_cases().items())
            if record.district == district and (group is None or record.group == group)
        ]

    # -- districts ----------------------------------------------------

    def districts(self) -> list[tuple[str, str]]:
        """Unique (id, name) pairs across all stored graphs."""
        names: dict[str, str] = {}
        for scenario in self.list_scenarios():
            graph_path = self._graph_path(scenario.id)
            if not graph_path.is_file():
                continue
            for district in load_graph(graph_path).districts:
                names[district.id] = district.name
        return sorted(names.items())

    def search_districts(self, query: str, limit: int = 20) -> list[tuple[str, str]]:
        return search_districts(self.districts(), query, limit)
