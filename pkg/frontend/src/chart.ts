/**
 * Timeline chart construction: percentile bands as semi-transparent
 * areas, the median as a solid line, a cursor on the selected day, and
 * exact-value tooltips.
 */
import type {
  AppContext,
  BandSeries,
  ChartCurve,
  ChartResponse,
  PercentileKey,
} from "./types.js";
import { PERCENTILE_KEYS } from "./types.js";

/** Default color cycle for scenarios that do not carry their own. */
export const FALLBACK_COLORS = [
  "#4269d0",
  "#efb118",
  "#ff725c",
  "#6cc5b0",
  "#3ca951",
  "#ff8ab7",
] as const;

export interface BandArea {
  low: number[];
  high: number[];
  /** Painter's opacity; the outer band is lighter than the inner one. */
  opacity: number;
}

export interface ChartLayer {
  scenarioId: string;
  name: string;
  color: string;
  days: number[];
  /** 5th-95th percentile area. */
  outer: BandArea;
  /** 25th-75th percentile area. */
  inner: BandArea;
  /** Median line. */
  median: number[];
}

export interface ChartView {
  compartment: string;
  district: string;
  group: string;
  layers: ChartLayer[];
  /** Day the date cursor is drawn at. */
  cursorDay: number;
}

export interface TooltipRow {
  scenarioId: string;
  name: string;
  color: string;
  values: Record<PercentileKey, number>;
}

export interface Tooltip {
  day: number;
  rows: TooltipRow[];
}

export function scenarioColor(curve: ChartCurve, index: number): string {
  return curve.color ?? FALLBACK_COLORS[index % FALLBACK_COLORS.length]!;
}

function bandAt(bands: BandSeries, key: PercentileKey, day: number): number {
  const series = bands[key];
  const value = series[day];
  if (value === undefined) {
    throw new Error(`day ${day} outside the chart horizon`);
  }
  return value;
}

/**
 * Build drawable layers for every visible scenario. Hidden scenarios are
 * filtered here, client-side; visibility changes never refetch.
 */
export function buildChartView(
  chart: ChartResponse,
  context: AppContext,
): ChartView {
  const layers = chart.scenarios
    .filter((curve) => context.visible.has(curve.id))
    .map((curve, index) => ({
      scenarioId: curve.id,
      name: curve.name,
      color: scenarioColor(curve, index),
      days: [...curve.days],
      outer: {
        low: [...curve.bands.p5],
        high: [...curve.bands.p95],
        opacity: 0.2,
      },
      inner: {
        low: [...curve.bands.p25],
        high: [...curve.bands.p75],
        opacity: 0.4,
      },
      median: [...curve.bands.p50],
    }));
  return {
    compartment: chart.compartment,
    district: chart.district,
    group: chart.group,
    layers,
    cursorDay: context.day,
  };
}

/**
 * Tooltip for a hovered day: all five percentile values per visible
 * scenario, taken verbatim from the API payload.
 */
export function tooltipAt(
  chart: ChartResponse,
  context: AppContext,
  day: number,
): Tooltip {
  const rows = chart.scenarios
    .filter((curve) => context.visible.has(curve.id))
    .map((curve, index) => {
      const values = {} as Record<PercentileKey, number>;
      for (const key of PERCENTILE_KEYS) {
        values[key] = bandAt(curve.bands, key, day);
      }
      return {
        scenarioId: curve.id,
        name: curve.name,
        color: scenarioColor(curve, index),
        values,
      };
    });
  return { day, rows };
}

/** Width of a layer's widest band; zero for single-member ensembles. */
export function maxBandWidth(layer: ChartLayer): number {
  let widest = 0;
  for (let i = 0; i < layer.outer.low.length; i++) {
    widest = Math.max(widest, layer.outer.high[i]! - layer.outer.low[i]!);
  }
  return widest;
}
