import { beforeEach, describe, expect, it } from "vitest";

import { Dashboard } from "../src/dashboard.js";
import { cardQuery, chartQuery, mapQuery } from "../src/queries.js";
import { MockApi } from "./mockApi.js";

let api: MockApi;
let dash: Dashboard;

beforeEach(async () => {
  api = new MockApi();
  dash = new Dashboard(api, { sleep: async () => {} });
  await dash.init();
});

/** Every panel must display exactly what its context query returns. */
function expectPanelsMatchContext(): void {
  expect(dash.map.data).toEqual(api.buildMap(mapQuery(dash.context)));
  expect(dash.chart.data).toEqual(api.buildChart(chartQuery(dash.context)));
  expect(dash.card.data).toEqual(api.buildCard(cardQuery(dash.context)));
  expect(dash.map.status).toBe("ready");
  expect(dash.chart.status).toBe("ready");
  expect(dash.card.status).toBe("ready");
}

describe("initial load", () => {
  it("renders one card per catalog scenario", () => {
    expect(dash.catalog.map((s) => s.id)).toEqual([
      "alpha",
      "bravo",
      "charlie",
      "delta",
    ]);
  });

  it("pre-selects the middle scenario and fetches all panels once", () => {
    expect(dash.context.scenario).toBe("bravo");
    expect(api.callsOf("map")).toHaveLength(1);
    expect(api.callsOf("chart")).toHaveLength(1);
    expect(api.callsOf("card")).toHaveLength(1);
    expectPanelsMatchContext();
  });
});

describe("interaction matrix", () => {
  it("card click refetches map and card, never the chart", async () => {
    await dash.onCardClick("alpha");
    expect(dash.context.scenario).toBe("alpha");
    expect(api.callsOf("map")).toHaveLength(2);
    expect(api.callsOf("card")).toHaveLength(2);
    expect(api.callsOf("chart")).toHaveLength(1);
    expectPanelsMatchContext();
  });

  it("clicking the already selected card fetches nothing", async () => {
    const calls = api.log.length;
    await dash.onCardClick("bravo");
    expect(api.log.length).toBe(calls);
  });

  it("compartment select refetches chart and map, never the card", async () => {
    await dash.onCompartmentSelect("H");
    expect(api.callsOf("map")).toHaveLength(2);
    expect(api.callsOf("chart")).toHaveLength(2);
    expect(api.callsOf("card")).toHaveLength(1);
    expectPanelsMatchContext();
  });

  it("re-selecting the current compartment fetches nothing", async () => {
    const calls = api.log.length;
    await dash.onCompartmentSelect("I");
    expect(api.log.length).toBe(calls);
  });

  it("date pick refetches map and card, never the chart", async () => {
    await dash.onChartDatePick(7);
    expect(dash.context.day).toBe(7);
    expect(api.callsOf("map")).toHaveLength(2);
    expect(api.callsOf("card")).toHaveLength(2);
    expect(api.callsOf("chart")).toHaveLength(1);
    expectPanelsMatchContext();
  });

  it("district click refetches chart and card, never the map", async () => {
    await dash.onMapDistrictClick("03003");
    expect(dash.context.district).toBe("03003");
    expect(api.callsOf("chart")).toHaveLength(2);
    expect(api.callsOf("card")).toHaveLength(2);
    expect(api.callsOf("map")).toHaveLength(1);
    expectPanelsMatchContext();
  });

  it("unknown scenario clicks are rejected before any fetch", async () => {
    const calls = api.log.length;
    await expect(dash.onCardClick("zeta")).rejects.toThrow(/unknown scenario/);
    expect(api.log.length).toBe(calls);
  });
});

describe("query signatures", () => {
  it("every query carries exactly its panel's dimensions", async () => {
    await dash.onCardClick("alpha");
    await dash.onCompartmentSelect("H");
    await dash.onChartDatePick(3);
    await dash.onMapDistrictClick("02002");
    await dash.onGroupFilterChange("0-39");
    for (const call of api.callsOf("map")) {
      expect(Object.keys(call.params).sort()).toEqual([
        "compartment",
        "day",
        "group",
        "scenario",
      ]);
    }
    for (const call of api.callsOf("chart")) {
      expect(Object.keys(call.params).sort()).toEqual([
        "compartment",
        "district",
        "group",
      ]);
    }
    for (const call of api.callsOf("card")) {
      expect(Object.keys(call.params).sort()).toEqual([
        "day",
        "district",
        "group",
        "scenario",
      ]);
    }
  });
});

describe("scripted interaction sequences", () => {
  it("leave every panel consistent with the context after each step", async () => {
    const steps: Array<() => Promise<void>> = [
      () => dash.onCardClick("alpha"),
      () => dash.onCompartmentSelect("H"),
      () => dash.onChartDatePick(7),
      () => dash.onMapDistrictClick("03003"),
      () => dash.onGroupFilterChange("0-39"),
      () => dash.onChartDatePick(999),
      () => dash.onCardClick("alpha"),
      () => dash.onSearchSelect({ id: "04004", name: "West" }),
      () => dash.onCompartmentSelect("D"),
      () => dash.onGroupFilterChange("total"),
      () => dash.onChartDatePick(0),
      () => dash.onCardClick("charlie"),
    ];
    for (const step of steps) {
      await step();
      expectPanelsMatchContext();
    }
  });
});

describe("date handling", () => {
  it("clamps an out-of-horizon pick to the nearest valid day", async () => {
    await dash.onChartDatePick(999);
    expect(dash.context.day).toBe(30);
    await dash.onChartDatePick(-4);
    expect(dash.context.day).toBe(0);
    expectPanelsMatchContext();
  });

  it("shows stable trend arrows on every compartment at day zero", async () => {
    await dash.onChartDatePick(0);
    const card = dash.card.data!;
    expect(card.compartments).toHaveLength(8);
    for (const row of card.compartments) {
      expect(row.trend.direction).toBe("stable");
    }
  });
});

describe("age-group filter", () => {
  it("refetches every panel changing only the group parameter", async () => {
    const before = {
      map: api.callsOf("map").at(-1)!.params,
      chart: api.callsOf("chart").at(-1)!.params,
      card: api.callsOf("card").at(-1)!.params,
    };
    await dash.onGroupFilterChange("40+");
    const after = {
      map: api.callsOf("map").at(-1)!.params,
      chart: api.callsOf("chart").at(-1)!.params,
      card: api.callsOf("card").at(-1)!.params,
    };
    for (const panel of ["map", "chart", "card"] as const) {
      expect(after[panel]).toEqual({ ...before[panel], group: "40+" });
    }
    expectPanelsMatchContext();
  });
});

describe("district search", () => {
  it("delegates suggestions to the search endpoint verbatim", async () => {
    const matches = await dash.searchDistricts("o");
    const direct = await api.searchDistricts("o");
    expect(matches).toEqual(direct.results);
    expect(matches.length).toBeGreaterThan(0);
  });

  it("skips the network for a blank query", async () => {
    const calls = api.log.length;
    expect(await dash.searchDistricts("   ")).toEqual([]);
    expect(api.log.length).toBe(calls);
  });

  it("selecting a suggestion behaves like a map click", async () => {
    await dash.onSearchSelect({ id: "01001", name: "North" });
    expect(dash.context.district).toBe("01001");
    expectPanelsMatchContext();
  });
});

describe("visibility toggles", () => {
  it("filter chart layers without any refetch", () => {
    const calls = api.log.length;
    dash.onVisibilityToggle("alpha");
    expect(api.log.length).toBe(calls);
    expect(dash.context.visible.has("alpha")).toBe(false);
    expect(dash.context.visible.has("bravo")).toBe(true);
  });
});

describe("superseded queries", () => {
  it("drops a stale response that resolves after a newer one", async () => {
    const release = api.holdNext("card");
    const first = dash.onMapDistrictClick("01001");
    const second = dash.onMapDistrictClick("02002");
    await second;
    release();
    await first;
    expect(dash.context.district).toBe("02002");
    expect(dash.card.data!.district).toBe("02002");
    expect(dash.card.status).toBe("ready");
    expectPanelsMatchContext();
  });
});
