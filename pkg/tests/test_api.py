"""Tests for the HTTP service."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from episim.api import create_app
from episim.ensemble import ParameterRange, ScenarioDefinition, run_ensemble
from episim.graph import District, GraphModel, MobilityEdge
from episim.model import (
    AgeBand,
    AgeGroups,
    CompartmentTensor,
    ContactMatrices,
    Damping,
    EpiParameters,
)
from episim.store import Store

ONE_GROUP = AgeGroups((AgeBand("all", 0, None),))


def params_for(num_groups: int) -> EpiParameters:
    return EpiParameters.from_scalars(
        num_groups,
        transmission_prob=0.05,
        symptomatic_infectiousness=0.5,
        latent_time=3.0,
        carrier_time=3.0,
        symptomatic_time=7.0,
        severe_time=10.0,
        critical_time=8.0,
        symptomatic_fraction=0.8,
        severe_fraction=0.2,
        critical_fraction=0.25,
        fatal_fraction=0.3,
    )


def small_graph() -> GraphModel:
    def state(**counts):
        return CompartmentTensor.from_dict(
            {k: [v] for k, v in counts.items()}, num_groups=1
        )

    zeros = np.zeros((1, 1))
    return GraphModel(
        age_groups=ONE_GROUP,
        contacts=ContactMatrices(home=np.full((1, 1), 8.0),
                                 school=zeros, work=zeros, other=zeros),
        parameters=params_for(1),
        districts=(
            District("01001", "North", state(S=9900.0, E=60.0, C=40.0)),
            District("02002", "South", state(S=4980.0, C=20.0)),
        ),
        edges=(MobilityEdge("01001", "02002", np.array([120.0])),),
    )


def scenario(scenario_id: str, **overrides) -> ScenarioDefinition:
    base = dict(
        id=scenario_id,
        name=scenario_id.capitalize(),
        ranges=(ParameterRange("transmission_prob", 0.03, 0.08),),
        num_members=4,
        num_days=5,
        seed=3,
    )
    base.update(overrides)
    return ScenarioDefinition(**base)


CASES_CSV = (
    "date,county_id,age_group,confirmed,deaths,recovered\n"
    "2020-03-01,01001,young,50,0,20\n"
    "2020-03-01,01001,old,30,2,10\n"
    "2020-03-02,01001,young,60,0,25\n"
    "2020-03-02,01001,old,40,3,12\n"
)


@pytest.fixture()
def client(tmp_path):
    store = Store(tmp_path / "store")
    graph = small_graph()
    baseline = scenario("baseline", color="#3366cc")
    lockdown = scenario(
        "lockdown",
        color="#cc3366",
        dampings=(Damping(strength=0.6, start_day=0, end_day=40),),
    )
    store.add_scenario(baseline, graph)
    store.add_scenario(lockdown, graph)
    store.save_result(run_ensemble(graph, baseline, dt=0.5, start_date="2020-03-01"))
    store.save_result(run_ensemble(graph, lockdown, dt=0.5))
    csv_path = tmp_path / "cases.csv"
    csv_path.write_text(CASES_CSV, encoding="utf-8")
    store.ingest_cases(csv_path)
    app = create_app(store, run_dt=0.5)
    with TestClient(app) as test_client:
        test_client.store = store
        yield test_client


def store_digest(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


class TestScenarioEndpoints:
    def test_list_scenarios(self, client):
        body = client.get("/scenarios").json()
        assert [s["id"] for s in body] == ["baseline", "lockdown"]
        assert all(s["has_result"] for s in body)
        assert body[0]["color"] == "#3366cc"

    def test_scenario_detail(self, client):
        body = client.get("/scenarios/lockdown").json()
        assert body["id"] == "lockdown"
        assert body["dampings"][0]["strength"] == 0.6
        assert body["ranges"][0]["field"] == "transmission_prob"
        assert body["result"]["num_days"] == 5
        assert body["result"]["district_ids"] == ["00000", "01001", "02002"]

    def test_unknown_scenario_is_404(self, client):
        assert client.get("/scenarios/ghost").status_code == 404


class TestMapView:
    def test_one_day_all_districts(self, client):
        body = client.get(
            "/scenarios/baseline/map",
            params={"compartment": "I", "day": 3},
        ).json()
        assert body["compartment"] == "I"
        assert body["day"] == 3
        assert body["group"] == "total"
        assert body["percentile"] == 50
        assert [d["id"] for d in body["districts"]] == ["01001", "02002"]
        assert body["districts"][0]["name"] == "North"

    def test_values_match_stored_result(self, client):
        result = client.store.load_result("baseline")
        body = client.get(
            "/scenarios/baseline/map",
            params={"compartment": "S", "day": 2, "percentile": 75},
        ).json()
        for entry in body["districts"]:
            expected = result.values[
                result.percentile_index(75),
                result.district_index(entry["id"]),
                2,
                result.group_index("total"),
                0,
            ]
            assert entry["value"] == pytest.approx(float(expected), rel=1e-12)

    def test_unknown_compartment_is_404(self, client):
        response = client.get(
            "/scenarios/baseline/map", params={"compartment": "X", "day": 0}
        )
        assert response.status_code == 404

    def test_day_out_of_range_is_422(self, client):
        response = client.get(
            "/scenarios/baseline/map", params={"compartment": "I", "day": 99}
        )
        assert response.status_code == 422

    def test_bad_percentile_is_422(self, client):
        response = client.get(
            "/scenarios/baseline/map",
            params={"compartment": "I", "day": 0, "percentile": 42},
        )
        assert response.status_code == 422

    def test_unknown_group_is_404(self, client):
        response = client.get(
            "/scenarios/baseline/map",
            params={"compartment": "I", "day": 0, "group": "seniors"},
        )
        assert response.status_code == 404


class TestChartView:
    def test_all_scenarios_all_days(self, client):
        body = client.get("/chart", params={"compartment": "I"}).json()
        assert body["district"] == "00000"
        assert [s["id"] for s in body["scenarios"]] == ["baseline", "lockdown"]
        for curve in body["scenarios"]:
            assert curve["days"] == [0, 1, 2, 3, 4, 5]
            assert sorted(curve["bands"]) == ["p25", "p5", "p50", "p75", "p95"]
            assert len(curve["bands"]["p50"]) == 6

    def test_band_values_match_result(self, client):
        result = client.store.load_result("lockdown")
        body = client.get(
            "/chart", params={"compartment": "D", "district": "01001"}
        ).json()
        curve = next(s for s in body["scenarios"] if s["id"] == "lockdown")
        expected = result.series(95, "D", "01001", "total")
        assert curve["bands"]["p95"] == pytest.approx(list(expected), rel=1e-12)

    def test_unknown_district_is_404(self, client):
        response = client.get(
            "/chart", params={"compartment": "I", "district": "99999"}
        )
        assert response.status_code == 404

    def test_unknown_compartment_is_404(self, client):
        assert client.get("/chart", params={"compartment": "Z"}).status_code == 404


class TestCardView:
    def test_all_compartments_one_day(self, client):
        body = client.get(
            "/scenarios/baseline/card", params={"day": 4, "district": "01001"}
        ).json()
        assert [c["code"] for c in body["compartments"]] == list("SECIHURD")
        for cell in body["compartments"]:
            assert {"p5", "p25", "p50", "p75", "p95"} <= set(cell)
            assert cell["trend"]["direction"] in ("increasing", "decreasing", "stable")
        assert body["date"] == "2020-03-05"

    def test_trend_matches_result(self, client):
        result = client.store.load_result("baseline")
        body = client.get("/scenarios/baseline/card", params={"day": 5}).json()
        infected = next(c for c in body["compartments"] if c["code"] == "I")
        expected = result.trend("I", 5)
        assert infected["trend"]["direction"] == expected.direction

    def test_day_out_of_range_is_422(self, client):
        response = client.get("/scenarios/baseline/card", params={"day": 50})
        assert response.status_code == 422

    def test_unknown_district_is_404(self, client):
        response = client.get(
            "/scenarios/baseline/card", params={"day": 1, "district": "99999"}
        )
        assert response.status_code == 404

    def test_missing_result_is_404(self, client):
        client.store.add_scenario(scenario("empty"), small_graph())
        response = client.get("/scenarios/empty/card", params={"day": 0})
        assert response.status_code == 404


class TestRuns:
    def test_plain_run_refreshes_base_scenario(self, client):
        response = client.post("/scenarios/baseline/runs", json={})
        assert response.status_code == 202
        body = response.json()
        assert body["status"] == "queued"
        assert body["scenario_id"] == "baseline"
        assert client.app.state.worker.wait_idle(timeout=30.0)
        status = client.get(f"/runs/{body['run_id']}/status").json()
        assert status["status"] == "done"
        assert status["error"] is None

    def test_run_without_body(self, client):
        response = client.post("/scenarios/baseline/runs")
        assert response.status_code == 202

    def test_overridden_run_becomes_derived_scenario(self, client):
        response = client.post(
            "/scenarios/lockdown/runs",
            json={
                "name": "Softer lockdown",
                "dampings": [{"strength": 0.3, "start_day": 0, "end_day": 40}],
                "num_members": 3,
            },
        )
        assert response.status_code == 202
        body = response.json()
        assert body["scenario_id"] == "lockdown-run1"
        assert client.app.state.worker.wait_idle(timeout=30.0)

        ids = [s["id"] for s in client.get("/scenarios").json()]
        assert "lockdown-run1" in ids
        derived = client.get("/scenarios/lockdown-run1").json()
        assert derived["name"] == "Softer lockdown"
        assert derived["num_members"] == 3
        assert derived["has_result"] is True

        chart = client.get("/chart", params={"compartment": "I"}).json()
        assert "lockdown-run1" in [s["id"] for s in chart["scenarios"]]
        card = client.get("/scenarios/lockdown-run1/card", params={"day": 2})
        assert card.status_code == 200

    def test_range_override_merges_by_field(self, client):
        response = client.post(
            "/scenarios/baseline/runs",
            json={"ranges": [{"field": "fatal_fraction", "low": 0.1, "high": 0.2}]},
        )
        assert response.status_code == 202
        derived = client.get("/scenarios/baseline-run1").json()
        fields = {r["field"] for r in derived["ranges"]}
        assert fields == {"transmission_prob", "fatal_fraction"}
        assert client.app.state.worker.wait_idle(timeout=30.0)

    def test_invalid_override_is_422(self, client):
        response = client.post(
            "/scenarios/baseline/runs",
            json={"ranges": [{"field": "fatal_fraction", "low": 0.9, "high": 0.1}]},
        )
        assert response.status_code == 422

    def test_unknown_range_field_is_422(self, client):
        response = client.post(
            "/scenarios/baseline/runs",
            json={"ranges": [{"field": "nope", "low": 0.1, "high": 0.2}]},
        )
        assert response.status_code == 422

    def test_run_for_unknown_scenario_is_404(self, client):
        assert client.post("/scenarios/ghost/runs", json={}).status_code == 404

    def test_unknown_run_status_is_404(self, client):
        assert client.get("/runs/run-9999/status").status_code == 404

    def test_runs_complete_in_submission_order(self, client):
        first = client.post("/scenarios/baseline/runs", json={}).json()["run_id"]
        second = client.post("/scenarios/lockdown/runs", json={}).json()["run_id"]
        assert client.app.state.worker.wait_idle(timeout=60.0)
        completed = client.app.state.worker.completed()
        assert completed.index(first) < completed.index(second)


class TestCaseData:
    def test_aggregates_groups_by_default(self, client):
        body = client.get("/casedata/01001").json()
        assert [r["date"] for r in body["records"]] == ["2020-03-01", "2020-03-02"]
        first = body["records"][0]
        assert first["confirmed"] == 80
        assert first["deaths"] == 2
        assert first["recovered"] == 30
        assert first["active"] == 48

    def test_group_filter(self, client):
        body = client.get("/casedata/01001", params={"group": "old"}).json()
        assert [r["confirmed"] for r in body["records"]] == [30, 40]

    def test_unknown_district_is_empty(self, client):
        body = client.get("/casedata/99999").json()
        assert body["records"] == []


class TestDistrictSearch:
    def test_search_by_name(self, client):
        body = client.get("/districts/search", params={"q": "nor"}).json()
        assert body["results"] == [{"id": "01001", "name": "North"}]

    def test_search_by_exact_id(self, client):
        body = client.get("/districts/search", params={"q": "02002"}).json()
        assert body["results"][0]["id"] == "02002"

    def test_empty_query_is_422(self, client):
        assert client.get("/districts/search", params={"q": ""}).status_code == 422


class TestReadOnlyViews:
    def test_get_endpoints_do_not_modify_store(self, client):
        before = store_digest(client.store.root)
        client.get("/scenarios")
        client.get("/scenarios/baseline")
        client.get("/scenarios/baseline/map", params={"compartment": "I", "day": 1})
        client.get("/chart", params={"compartment": "I"})
        client.get("/scenarios/baseline/card", params={"day": 1})
        client.get("/casedata/01001")
        client.get("/districts/search", params={"q": "north"})
        assert store_digest(client.store.root) == before
