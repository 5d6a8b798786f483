import { beforeEach, describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { Dashboard } from "../src/dashboard.js";
import {
  buildRunRequest,
  draftsEqualBase,
  pollDelayMs,
  validateDraft,
} from "../src/sliders.js";
import type { DampingDraft } from "../src/sliders.js";
import type { DampingSpec } from "../src/types.js";
import { MockApi } from "./mockApi.js";

const BASE: DampingSpec[] = [
  { strength: 0.3, start_day: 5, end_day: 15, locations: ["school"] },
];

function draft(overrides: Partial<DampingDraft> = {}): DampingDraft {
  return {
    strength: 0.3,
    start_day: 5,
    end_day: 15,
    locations: ["school"],
    ...overrides,
  };
}

describe("draft validation", () => {
  it("accepts a well-formed draft", () => {
    expect(validateDraft(draft())).toEqual([]);
  });

  it("flags strength outside [0, 1]", () => {
    expect(validateDraft(draft({ strength: 1.2 }))[0]!.field).toBe("strength");
    expect(validateDraft(draft({ strength: -0.1 }))[0]!.field).toBe(
      "strength",
    );
  });

  it("flags a window that ends before it starts", () => {
    const errors = validateDraft(draft({ start_day: 20, end_day: 10 }));
    expect(errors.map((e) => e.field)).toContain("end_day");
  });

  it("flags fractional or negative days", () => {
    expect(validateDraft(draft({ start_day: -1 }))[0]!.field).toBe(
      "start_day",
    );
    expect(validateDraft(draft({ end_day: 7.5 }))[0]!.field).toBe("end_day");
  });

  it("flags empty or unknown locations", () => {
    expect(validateDraft(draft({ locations: [] }))[0]!.field).toBe(
      "locations",
    );
    expect(validateDraft(draft({ locations: ["gym"] }))[0]!.field).toBe(
      "locations",
    );
  });

  it("checks group labels against the known list when given", () => {
    const errors = validateDraft(draft({ groups: ["90+"] }), ["0-39", "40+"]);
    expect(errors.map((e) => e.field)).toContain("groups");
    expect(validateDraft(draft({ groups: ["40+"] }), ["0-39", "40+"])).toEqual(
      [],
    );
  });
});

describe("change detection", () => {
  it("treats reordered but equal schedules as unchanged", () => {
    const base: DampingSpec[] = [
      ...BASE,
      { strength: 0.5, start_day: 0, end_day: 3, locations: ["home", "work"] },
    ];
    const drafts = [
      draft({ strength: 0.5, start_day: 0, end_day: 3, locations: ["work", "home"] }),
      draft(),
    ];
    expect(draftsEqualBase(drafts, base)).toBe(true);
  });

  it("builds no request when nothing changed", () => {
    expect(buildRunRequest([draft()], BASE)).toBeNull();
  });

  it("builds a damping override request when a slider moved", () => {
    const request = buildRunRequest(
      [draft({ end_day: 60 })],
      BASE,
      "Longer closure",
    );
    expect(request).not.toBeNull();
    expect(request!.name).toBe("Longer closure");
    expect(request!.dampings).toEqual([
      { strength: 0.3, start_day: 5, end_day: 60, locations: ["school"] },
    ]);
  });
});

describe("poll backoff", () => {
  it("doubles from one second up to a fifteen second ceiling", () => {
    expect([0, 1, 2, 3, 4, 5, 6].map(pollDelayMs)).toEqual([
      1000, 2000, 4000, 8000, 15000, 15000, 15000,
    ]);
  });
});

describe("slider commits", () => {
  let api: MockApi;
  let dash: Dashboard;
  let delays: number[];

  beforeEach(async () => {
    api = new MockApi();
    delays = [];
    dash = new Dashboard(api, {
      sleep: async (ms) => {
        delays.push(ms);
      },
    });
    await dash.init();
  });

  it("reports invalid drafts inline without contacting the server", async () => {
    const calls = api.log.length;
    const tracker = await dash.onSliderCommit("bravo", [
      draft({ strength: 2 }),
    ]);
    expect(tracker).toBeNull();
    expect(dash.sliders.fieldErrors[0]!.field).toBe("strength");
    expect(api.log.length).toBe(calls);
  });

  it("sends nothing when no slider moved", async () => {
    const tracker = await dash.onSliderCommit("bravo", [draft()]);
    expect(tracker).toBeNull();
    expect(api.callsOf("triggerRun")).toHaveLength(0);
  });

  it("runs a changed schedule to completion and absorbs the result", async () => {
    const tracker = await dash.onSliderCommit(
      "bravo",
      [draft({ end_day: 60 })],
      "Extended closure",
    );
    expect(tracker).not.toBeNull();
    expect(tracker!.status).toBe("done");
    expect(tracker!.scenarioId).toBe("bravo-run1");

    expect(api.callsOf("triggerRun")).toHaveLength(1);
    const post = api.callsOf("triggerRun")[0]!.params;
    expect(post["scenarioId"]).toBe("bravo");
    expect((post["request"] as { dampings: unknown[] }).dampings).toHaveLength(
      1,
    );

    // queued -> running -> done means two polls with backed-off waits
    expect(delays).toEqual([1000, 2000]);
    expect(dash.catalog.map((s) => s.id)).toContain("bravo-run1");
    expect(dash.context.visible.has("bravo-run1")).toBe(true);
    const chartIds = dash.chart.data!.scenarios.map((curve) => curve.id);
    expect(chartIds).toContain("bravo-run1");
  });

  it("surfaces a server-side 422 as an inline error", async () => {
    // bypass client-side validation to exercise the server path
    const rejecting = new MockApi();
    rejecting.triggerRun = async () => {
      rejecting.log.push({ kind: "triggerRun", params: {} });
      throw new ApiError(422, "damping strength must lie in [0, 1]");
    };
    const dash2 = new Dashboard(rejecting, { sleep: async () => {} });
    await dash2.init();
    const tracker = await dash2.onSliderCommit("bravo", [
      draft({ end_day: 60 }),
    ]);
    expect(tracker).toBeNull();
    expect(dash2.sliders.serverError).toMatch(/strength/);
    expect(dash2.runs).toHaveLength(0);
  });

  it("keeps distinct ids for consecutive derived runs", async () => {
    await dash.onSliderCommit("bravo", [draft({ end_day: 60 })]);
    const second = await dash.onSliderCommit("bravo", [
      draft({ end_day: 80 }),
    ]);
    expect(second!.scenarioId).toBe("bravo-run2");
    const ids = dash.catalog.map((s) => s.id);
    expect(ids).toContain("bravo-run1");
    expect(ids).toContain("bravo-run2");
  });
});
