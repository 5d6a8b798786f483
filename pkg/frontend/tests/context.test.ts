import { describe, expect, it } from "vitest";

import {
  addVisible,
  clampDay,
  defaultContext,
  pickDay,
  selectCompartment,
  selectDistrict,
  selectScenario,
  setGroupFilter,
  toggleVisible,
} from "../src/context.js";
import { COMPARTMENTS, NATIONAL_ID, TOTAL_GROUP } from "../src/types.js";
import type { ScenarioSummary } from "../src/types.js";

function catalog(ids: string[]): ScenarioSummary[] {
  return ids.map((id, index) => ({
    id,
    name: id,
    description: "",
    color: null,
    num_members: 8,
    num_days: 30,
    seed: index,
    has_result: true,
  }));
}

describe("defaultContext", () => {
  it("pre-selects the middle card in catalog order", () => {
    expect(defaultContext(catalog(["a", "b", "c"])).scenario).toBe("b");
    expect(defaultContext(catalog(["a", "b", "c", "d"])).scenario).toBe("b");
    expect(defaultContext(catalog(["a"])).scenario).toBe("a");
  });

  it("defaults to the all-ages group, national district, day zero", () => {
    const context = defaultContext(catalog(["a", "b"]));
    expect(context.group).toBe(TOTAL_GROUP);
    expect(context.district).toBe(NATIONAL_ID);
    expect(context.day).toBe(0);
  });

  it("starts with every scenario visible", () => {
    const context = defaultContext(catalog(["a", "b", "c"]));
    expect([...context.visible].sort()).toEqual(["a", "b", "c"]);
  });

  it("rejects an empty catalog", () => {
    expect(() => defaultContext([])).toThrow(/empty/);
  });
});

describe("selection updates", () => {
  const base = defaultContext(catalog(["a", "b", "c"]));

  it("reports exactly the changed dimension", () => {
    expect(selectScenario(base, "a").changed).toEqual(["scenario"]);
    expect(selectCompartment(base, "H").changed).toEqual(["compartment"]);
    expect(pickDay(base, 5, 30).changed).toEqual(["day"]);
    expect(selectDistrict(base, "01001").changed).toEqual(["district"]);
    expect(setGroupFilter(base, "0-39").changed).toEqual(["group"]);
  });

  it("re-selecting the current value changes nothing", () => {
    expect(selectScenario(base, base.scenario).changed).toEqual([]);
    expect(selectCompartment(base, base.compartment).changed).toEqual([]);
    expect(pickDay(base, base.day, 30).changed).toEqual([]);
    expect(selectDistrict(base, base.district).changed).toEqual([]);
    expect(setGroupFilter(base, base.group).changed).toEqual([]);
  });

  it("rejects unknown compartment codes", () => {
    expect(() =>
      selectCompartment(base, "X" as (typeof COMPARTMENTS)[number]),
    ).toThrow(/unknown compartment/);
  });

  it("never mutates the input context", () => {
    const before = { ...base, visible: new Set(base.visible) };
    selectScenario(base, "c");
    pickDay(base, 9, 30);
    toggleVisible(base, "a");
    expect(base.scenario).toBe(before.scenario);
    expect(base.day).toBe(before.day);
    expect([...base.visible].sort()).toEqual([...before.visible].sort());
  });
});

describe("date clamping", () => {
  it("clamps out-of-horizon picks to the nearest valid day", () => {
    expect(clampDay(-3, 30)).toBe(0);
    expect(clampDay(999, 30)).toBe(30);
    expect(clampDay(12, 30)).toBe(12);
    expect(clampDay(7.6, 30)).toBe(8);
  });
});

describe("visibility", () => {
  const base = defaultContext(catalog(["a", "b"]));

  it("toggles a layer off and back on", () => {
    const off = toggleVisible(base, "a").context;
    expect(off.visible.has("a")).toBe(false);
    expect(off.visible.has("b")).toBe(true);
    const on = toggleVisible(off, "a").context;
    expect(on.visible.has("a")).toBe(true);
  });

  it("addVisible is idempotent", () => {
    expect(addVisible(base, "a").changed).toEqual([]);
    const widened = addVisible(base, "z");
    expect(widened.changed).toEqual(["visible"]);
    expect(widened.context.visible.has("z")).toBe(true);
  });
});

describe("compartment catalog", () => {
  it("lists the eight compartments in canonical order", () => {
    expect(COMPARTMENTS).toEqual(["S", "E", "C", "I", "H", "U", "R", "D"]);
  });
});
