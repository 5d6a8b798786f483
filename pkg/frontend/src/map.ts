/**
 * Choropleth construction: joins a map slice from the API with the
 * bundled topology and colors districts through a customizable heat
 * legend.
 */
import type { MapResponse } from "./types.js";
import type { Topology } from "./topology.js";

export interface HeatLegend {
  /** Ascending thresholds; values below the first take the first color. */
  breakpoints: number[];
  /** One color per bin: breakpoints.length + 1 entries. */
  colors: string[];
}

/** Default sequential scheme with fixed breakpoints, overridable. */
export const DEFAULT_LEGEND: HeatLegend = {
  breakpoints: [1, 10, 100, 1000, 10000],
  colors: [
    "#f7fbff",
    "#c6dbef",
    "#6baed6",
    "#2171b5",
    "#08306b",
    "#041836",
  ],
};

export interface MapFeature {
  id: string;
  name: string;
  value: number;
  color: string;
  polygon: Array<[number, number]>;
}

export interface MapView {
  scenarioId: string;
  compartment: string;
  day: number;
  group: string;
  features: MapFeature[];
  /** District ids present in the data but missing a shape. */
  missingShapes: string[];
  legend: HeatLegend;
}

export function makeLegend(
  breakpoints: number[],
  colors: string[],
): HeatLegend {
  if (colors.length !== breakpoints.length + 1) {
    throw new Error(
      `legend needs ${breakpoints.length + 1} colors for ` +
        `${breakpoints.length} breakpoints, got ${colors.length}`,
    );
  }
  for (let i = 1; i < breakpoints.length; i++) {
    if (breakpoints[i]! <= breakpoints[i - 1]!) {
      throw new Error("legend breakpoints must be strictly increasing");
    }
  }
  return { breakpoints, colors };
}

/** Bin a value: the first bin whose breakpoint exceeds it wins. */
export function colorFor(value: number, legend: HeatLegend): string {
  for (let i = 0; i < legend.breakpoints.length; i++) {
    if (value < legend.breakpoints[i]!) {
      return legend.colors[i]!;
    }
  }
  return legend.colors[legend.breakpoints.length]!;
}

/**
 * Join the API's per-district values with polygon shapes. Every district
 * in the response appears either as a feature or in `missingShapes`;
 * values pass through untouched.
 */
export function buildMapView(
  map: MapResponse,
  topology: Topology,
  legend: HeatLegend = DEFAULT_LEGEND,
): MapView {
  const features: MapFeature[] = [];
  const missingShapes: string[] = [];
  for (const district of map.districts) {
    const shape = topology[district.id];
    if (shape === undefined) {
      missingShapes.push(district.id);
      continue;
    }
    features.push({
      id: district.id,
      name: district.name,
      value: district.value,
      color: colorFor(district.value, legend),
      polygon: shape.polygon,
    });
  }
  return {
    scenarioId: map.scenario_id,
    compartment: map.compartment,
    day: map.day,
    group: map.group,
    features,
    missingShapes,
    legend,
  };
}
