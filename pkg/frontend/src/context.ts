/**
 * The shared selection context and its pure update rules. Panels never
 * talk to each other; every interaction funnels through these functions
 * and the dashboard refetches whatever the change invalidates.
 */
import type {
  AppContext,
  CompartmentCode,
  ScenarioSummary,
} from "./types.js";
import { COMPARTMENTS, NATIONAL_ID, TOTAL_GROUP } from "./types.js";

/** Selection dimensions a context update can touch. */
export type ContextDimension =
  | "scenario"
  | "compartment"
  | "day"
  | "district"
  | "group"
  | "visible";

export interface ContextUpdate {
  context: AppContext;
  changed: ContextDimension[];
}

/**
 * Initial context for a catalog: the middle card in catalog order is
 * pre-selected, the all-ages group and the national aggregate are the
 * defaults, and every scenario starts visible.
 */
export function defaultContext(catalog: ScenarioSummary[]): AppContext {
  if (catalog.length === 0) {
    throw new Error("cannot build a context from an empty scenario catalog");
  }
  const middle = catalog[Math.floor((catalog.length - 1) / 2)]!;
  return {
    scenario: middle.id,
    compartment: "I",
    day: 0,
    district: NATIONAL_ID,
    group: TOTAL_GROUP,
    visible: new Set(catalog.map((s) => s.id)),
  };
}

function unchanged(context: AppContext): ContextUpdate {
  return { context, changed: [] };
}

export function selectScenario(
  context: AppContext,
  scenarioId: string,
): ContextUpdate {
  if (scenarioId === context.scenario) return unchanged(context);
  return {
    context: { ...context, scenario: scenarioId },
    changed: ["scenario"],
  };
}

export function selectCompartment(
  context: AppContext,
  compartment: CompartmentCode,
): ContextUpdate {
  if (!COMPARTMENTS.includes(compartment)) {
    throw new Error(`unknown compartment code ${compartment}`);
  }
  if (compartment === context.compartment) return unchanged(context);
  return {
    context: { ...context, compartment },
    changed: ["compartment"],
  };
}

/** Clamp an out-of-horizon pick to the nearest valid day. */
export function clampDay(day: number, horizon: number): number {
  return Math.min(Math.max(Math.round(day), 0), horizon);
}

export function pickDay(
  context: AppContext,
  day: number,
  horizon: number,
): ContextUpdate {
  const clamped = clampDay(day, horizon);
  if (clamped === context.day) return unchanged(context);
  return { context: { ...context, day: clamped }, changed: ["day"] };
}

export function selectDistrict(
  context: AppContext,
  districtId: string,
): ContextUpdate {
  if (districtId === context.district) return unchanged(context);
  return {
    context: { ...context, district: districtId },
    changed: ["district"],
  };
}

export function setGroupFilter(
  context: AppContext,
  group: string,
): ContextUpdate {
  if (group === context.group) return unchanged(context);
  return { context: { ...context, group }, changed: ["group"] };
}

/** Visibility only filters chart layers; it never triggers a refetch. */
export function toggleVisible(
  context: AppContext,
  scenarioId: string,
): ContextUpdate {
  const visible = new Set(context.visible);
  if (visible.has(scenarioId)) {
    visible.delete(scenarioId);
  } else {
    visible.add(scenarioId);
  }
  return { context: { ...context, visible }, changed: ["visible"] };
}

/** Make a newly created scenario visible (used after triggered runs). */
export function addVisible(
  context: AppContext,
  scenarioId: string,
): ContextUpdate {
  if (context.visible.has(scenarioId)) return unchanged(context);
  const visible = new Set(context.visible);
  visible.add(scenarioId);
  return { context: { ...context, visible }, changed: ["visible"] };
}
