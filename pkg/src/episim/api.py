"""HTTP service exposing scenarios, results and case data.

The view endpoints mirror how the data is meant to be read together:

- the map compares all districts for one scenario, compartment and day;
- the chart compares all scenarios over all days for one compartment
  and district;
- the card drills into one scenario, district and day across every
  compartment, each with its trend against day 0.

Unknown scenarios, compartments and districts answer 404; structurally
valid requests whose values fall outside the stored result (day or
percentile) answer 422. GET endpoints never modify the store.

Runs triggered over HTTP are executed by a single background worker in
submission order. A run with overrides first registers a derived
scenario (same graph, adjusted settings), so its result shows up in the
chart and cards next to the predefined scenarios as soon as it finishes.
"""

from __future__ import annotations

import datetime as dt
import itertools
import logging
import queue
import threading
import time
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .ensemble import (
    NATIONAL_ID,
    PERCENTILES,
    TOTAL_GROUP,
    ParameterRange,
    ScenarioDefinition,
    run_ensemble,
)
from .errors import EpisimError, ValidationError
from .model import DEFAULT_DT, Compartment, Damping
from .store import Store

log = logging.getLogger(__name__)

RUN_STATES = ("queued", "running", "done", "failed")


@dataclass
class RunState:
    """Lifecycle of one triggered run."""

    run_id: str
    scenario_id: str
    status: str = "queued"
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "scenario_id": self.scenario_id,
            "status": self.status,
            "error": self.error,
        }


class RunWorker:
    """Executes runs one at a time, in submission order."""

    def __init__(self, store: Store, dt: float = DEFAULT_DT) -> None:
        self._store = store
        self._dt = dt
        self._queue: queue.Queue[str] = queue.Queue()
        self._runs: dict[str, RunState] = {}
        self._completed: list[str] = []
        self._lock = threading.Lock()
        self._counter = itertools.count(1)
        self._thread = threading.Thread(
            target=self._loop, daemon=True, name="episim-run-worker"
        )
        self._thread.start()

    def submit(self, scenario_id: str) -> RunState:
        with self._lock:
            run_id = f"run-{next(self._counter):04d}"
            state = RunState(run_id=run_id, scenario_id=scenario_id)
            self._runs[run_id] = state
        self._queue.put(run_id)
        return state

    def status(self, run_id: str) -> RunState | None:
        with self._lock:
            return self._runs.get(run_id)

    def completed(self) -> list[str]:
        """Run ids in completion order."""
        with self._lock:
            return list(self._completed)

    def wait_idle(self, timeout: float | None = None) -> bool:
        """Block until all queued runs finished; True when idle."""
        deadline = None if timeout is None else time.monotonic() + timeout
        while self._queue.unfinished_tasks:
            if deadline is not None and time.monotonic() > deadline:
                return False
            time.sleep(0.01)
        return True

    def _loop(self) -> None:
        while True:
            run_id = self._queue.get()
            state = self._runs[run_id]
            state.status = "running"
            try:
                scenario = self._store.get_scenario(state.scenario_id)
                graph = self._store.get_graph(state.scenario_id)
                result = run_ensemble(graph, scenario, dt=self._dt)
                self._store.save_result(result)
                state.status = "done"
            except Exception as exc:
                state.status = "failed"
                state.error = str(exc)
                log.exception("run %s for scenario %s failed", run_id, state.scenario_id)
            finally:
                with self._lock:
                    self._completed.append(run_id)
                self._queue.task_done()


class RangeOverride(BaseModel):
    field: str
    low: float | list[float]
    high: float | list[float]


class DampingOverride(BaseModel):
    strength: float
    start_day: int
    end_day: int
    locations: list[str] | None = None
    groups: list[int] | None = None


class RunRequest(BaseModel):
    """Optional adjustments for a triggered run.

    Ranges merge field-wise into the base scenario's ranges; a damping
    list replaces the base schedule entirely.
    """

    name: str | None = None
    num_members: int | None = Field(default=None, ge=1)
    num_days: int | None = Field(default=None, ge=1)
    seed: int | None = Field(default=None, ge=0)
    ranges: list[RangeOverride] | None = None
    dampings: list[DampingOverride] | None = None

    def is_empty(self) -> bool:
        return self.model_dump(exclude_none=True) == {}


def _derived_scenario(
    base: ScenarioDefinition, request: RunRequest, derived_id: str
) -> ScenarioDefinition:
    try:
        ranges = {r.field: r for r in base.ranges}
        for override in request.ranges or ():
            spec = ParameterRange(
                field=override.field,
                low=np.asarray(override.low, dtype=np.float64),
                high=np.asarray(override.high, dtype=np.float64),
            )
            ranges[spec.field] = spec
        if request.dampings is None:
            dampings = base.dampings
        else:
            dampings = tuple(
                Damping.from_dict(d.model_dump(exclude_none=True))
                for d in request.dampings
            )
        return ScenarioDefinition(
            id=derived_id,
            name=request.name or f"{base.name} (adjusted)",
            description=f"Derived from scenario {base.id}",
            dampings=dampings,
            ranges=tuple(ranges.values()),
            num_members=request.num_members or base.num_members,
            num_days=request.num_days or base.num_days,
            seed=base.seed if request.seed is None else request.seed,
            color=base.color,
        )
    except ValidationError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def create_app(
    store: Store,
    worker: RunWorker | None = None,
    run_dt: float = DEFAULT_DT,
) -> FastAPI:
    """Build the HTTP application on top of a store."""
    app = FastAPI(title="episim service", version=__version__)
    app.state.store = store
    app.state.worker = worker if worker is not None else RunWorker(store, dt=run_dt)

    def get_scenario(scenario_id: str) -> ScenarioDefinition:
        if not store.has_scenario(scenario_id):
            raise HTTPException(status_code=404, detail=f"unknown scenario {scenario_id!r}")
        return store.get_scenario(scenario_id)

    def get_result(scenario_id: str):
        get_scenario(scenario_id)
        if not store.has_result(scenario_id):
            raise HTTPException(
                status_code=404, detail=f"scenario {scenario_id!r} has no result yet"
            )
        return store.load_result(scenario_id)

    def get_compartment(code: str) -> Compartment:
        try:
            return Compartment.from_code(code)
        except ValidationError:
            raise HTTPException(
                status_code=404, detail=f"unknown compartment {code!r}"
            ) from None

    def check_day(day: int, num_days: int) -> None:
        if not 0 <= day <= num_days:
            raise HTTPException(
                status_code=422,
                detail=f"day must lie in [0, {num_days}], got {day}",
            )

    def check_percentile(percentile: int) -> None:
        if percentile not in PERCENTILES:
            raise HTTPException(
                status_code=422,
                detail=f"percentile must be one of {list(PERCENTILES)}",
            )

    def check_group(result, group: str) -> None:
        if group not in result.group_labels:
            raise HTTPException(
                status_code=404,
                detail=f"unknown age group {group!r} (have {list(result.group_labels)})",
            )

    def scenario_summary(scenario: ScenarioDefinition) -> dict:
        return {
            "id": scenario.id,
            "name": scenario.name,
            "description": scenario.description,
            "color": scenario.color,
            "num_members": scenario.num_members,
            "num_days": scenario.num_days,
            "seed": scenario.seed,
            "has_result": store.has_result(scenario.id),
        }

    @app.get("/scenarios")
    def list_scenarios() -> list[dict]:
        return [scenario_summary(s) for s in store.list_scenarios()]

    @app.get("/scenarios/{scenario_id}")
    def scenario_detail(scenario_id: str) -> dict:
        scenario = get_scenario(scenario_id)
        detail = scenario_summary(scenario)
        detail["dampings"] = [d.to_dict() for d in scenario.dampings]
        detail["ranges"] = [r.to_dict() for r in scenario.ranges]
        if store.has_result(scenario_id):
            result = store.load_result(scenario_id)
            detail["result"] = {
                "num_days": result.num_days,
                "num_members": result.num_members,
                "district_ids": list(result.district_ids),
                "group_labels": list(result.group_labels),
                "percentiles": list(result.percentiles),
                "start_date": result.start_date,
            }
        return detail

    @app.get("/scenarios/{scenario_id}/map")
    def map_view(
        scenario_id: str,
        compartment: str,
        day: int,
        group: str = TOTAL_GROUP,
        percentile: int = 50,
    ) -> dict:
        comp = get_compartment(compartment)
        result = get_result(scenario_id)
        check_day(day, result.num_days)
        check_percentile(percentile)
        check_group(result, group)
        names = dict(store.districts())
        p_idx = result.percentile_index(percentile)
        g_idx = result.group_index(group)
        districts = []
        for d_idx, district_id in enumerate(result.district_ids):
            if district_id == NATIONAL_ID:
                continue
            districts.append({
                "id": district_id,
                "name": names.get(district_id, district_id),
                "value": float(result.values[p_idx, d_idx, day, g_idx, comp]),
            })
        return {
            "scenario_id": scenario_id,
            "compartment": comp.code,
            "day": day,
            "group": group,
            "percentile": percentile,
            "districts": districts,
        }

    @app.get("/chart")
    def chart_view(
        compartment: str,
        district: str = NATIONAL_ID,
        group: str = TOTAL_GROUP,
    ) -> dict:
        comp = get_compartment(compartment)
        curves = []
        district_known = False
        for scenario in store.list_scenarios():
            if not store.has_result(scenario.id):
                continue
            result = store.load_result(scenario.id)
            if district not in result.district_ids:
                continue
            district_known = True
            check_group(result, group)
            bands = {
                f"p{q}": [
                    float(v) for v in result.series(q, comp, district, group)
                ]
                for q in result.percentiles
            }
            curves.append({
                "id": scenario.id,
                "name": scenario.name,
                "color": scenario.color,
                "days": list(range(result.num_days + 1)),
                "bands": bands,
            })
        if not district_known:
            raise HTTPException(
                status_code=404,
                detail=f"district {district!r} not found in any stored result",
            )
        return {
            "compartment": comp.code,
            "district": district,
            "group": group,
            "scenarios": curves,
        }

    @app.get("/scenarios/{scenario_id}/card")
    def card_view(
        scenario_id: str,
        day: int,
        district: str = NATIONAL_ID,
        group: str = TOTAL_GROUP,
    ) -> dict:
        result = get_result(scenario_id)
        check_day(day, result.num_days)
        check_group(result, group)
        if district not in result.district_ids:
            raise HTTPException(status_code=404, detail=f"unknown district {district!r}")
        d_idx = result.district_index(district)
        g_idx = result.group_index(group)
        compartments = []
        for comp in Compartment:
            trend = result.trend(comp, day, district, group)
            cell = {
                f"p{q}": float(result.values[result.percentile_index(q), d_idx, day, g_idx, comp])
                for q in result.percentiles
            }
            compartments.append({
                "code": comp.code,
                "label": comp.label,
                **cell,
                "trend": {"direction": trend.direction, "change": trend.change},
            })
        date = None
        if result.start_date is not None:
            date = (dt.date.fromisoformat(result.start_date)
                    + dt.timedelta(days=day)).isoformat()
        return {
            "scenario_id": scenario_id,
            "day": day,
            "date": date,
            "district": district,
            "group": group,
            "compartments": compartments,
        }

    @app.post("/scenarios/{scenario_id}/runs", status_code=202)
    def trigger_run(scenario_id: str, request: RunRequest | None = None) -> dict:
        scenario = get_scenario(scenario_id)
        request = request or RunRequest()
        if request.is_empty():
            target_id = scenario.id
        else:
            for n in itertools.count(1):
                target_id = f"{scenario.id}-run{n}"
                if not store.has_scenario(target_id):
                    break
            derived = _derived_scenario(scenario, request, target_id)
            store.add_scenario(derived, store.get_graph(scenario.id))
        state = app.state.worker.submit(target_id)
        return state.to_dict()

    @app.get("/runs/{run_id}/status")
    def run_status(run_id: str) -> dict:
        state = app.state.worker.status(run_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return state.to_dict()

    @app.get("/casedata/{district}")
    def case_data(district: str, group: str | None = None) -> dict:
        records = store.case_series(district, group)
        if group is None:
            by_date: dict[str, dict] = {}
            for record in records:
                entry = by_date.setdefault(record.date, {
                    "date": record.date, "confirmed": 0, "deaths": 0, "recovered": 0,
                })
                entry["confirmed"] += record.confirmed
                entry["deaths"] += record.deaths
                entry["recovered"] += record.recovered
            rows = [by_date[date] for date in sorted(by_date)]
        else:
            rows = [
                {
                    "date": r.date,
                    "confirmed": r.confirmed,
                    "deaths": r.deaths,
                    "recovered": r.recovered,
                }
                for r in records
            ]
        for row in rows:
            row["active"] = row["confirmed"] - row["deaths"] - row["recovered"]
        return {"district": district, "group": group, "records": rows}

    @app.get("/districts/search")
    def district_search(q: str = Query(min_length=1)) -> dict:
        matches = store.search_districts(q)
        return {
            "query": q,
            "results": [{"id": district_id, "name": name} for district_id, name in matches],
        }

    @app.exception_handler(EpisimError)
    def domain_error(request, exc: EpisimError):  # pragma: no cover - safety net
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    return app
