/**
 * The interaction matrix: which context dimensions each panel depends
 * on, and how a context maps to that panel's one legal query. Panels
 * must never issue a query outside their signature, so the query
 * builders here are the only path to the API.
 *
 *   map:   one scenario, one compartment, one day, all districts
 *   chart: all scenarios, one compartment, all days, one district
 *   card:  one scenario, all compartments, one day, one district
 */
import type { CardQuery, ChartQuery, MapQuery } from "./api.js";
import type { AppContext } from "./types.js";
import type { ContextDimension } from "./context.js";

export type PanelName = "map" | "chart" | "card";

export const PANELS: readonly PanelName[] = ["map", "chart", "card"];

/** Context dimensions that feed each panel's query, per the matrix. */
export const PANEL_DEPENDENCIES: Record<
  PanelName,
  readonly ContextDimension[]
> = {
  map: ["scenario", "compartment", "day", "group"],
  chart: ["compartment", "district", "group"],
  card: ["scenario", "day", "district", "group"],
};

export function mapQuery(context: AppContext): MapQuery {
  return {
    scenario: context.scenario,
    compartment: context.compartment,
    day: context.day,
    group: context.group,
  };
}

export function chartQuery(context: AppContext): ChartQuery {
  return {
    compartment: context.compartment,
    district: context.district,
    group: context.group,
  };
}

export function cardQuery(context: AppContext): CardQuery {
  return {
    scenario: context.scenario,
    day: context.day,
    district: context.district,
    group: context.group,
  };
}

/** Panels whose query is invalidated by the given dimension changes. */
export function panelsToRefetch(
  changed: readonly ContextDimension[],
): PanelName[] {
  return PANELS.filter((panel) =>
    PANEL_DEPENDENCIES[panel].some((dim) => changed.includes(dim)),
  );
}
