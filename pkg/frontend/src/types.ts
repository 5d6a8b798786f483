/**
 * Shared domain types: the HTTP service's payload shapes and the
 * dashboard's selection context.
 */

/** Compartment codes in canonical order, as used by every API payload. */
export const COMPARTMENTS = ["S", "E", "C", "I", "H", "U", "R", "D"] as const;

export type CompartmentCode = (typeof COMPARTMENTS)[number];

/** Human-readable compartment labels, same order as COMPARTMENTS. */
export const COMPARTMENT_LABELS: Record<CompartmentCode, string> = {
  S: "Susceptible",
  E: "Exposed",
  C: "Carrier",
  I: "Infected",
  H: "Hospitalized",
  U: "Intensive Care",
  R: "Recovered",
  D: "Dead",
};

/** Contact locations accepted by damping overrides. */
export const LOCATIONS = ["home", "school", "work", "other"] as const;

export type Location = (typeof LOCATIONS)[number];

/** District id of the national aggregate row. */
export const NATIONAL_ID = "00000";

/** Age group label of the all-ages aggregate. */
export const TOTAL_GROUP = "total";

/** Percentiles served for every band, low to high. */
export const PERCENTILES = [5, 25, 50, 75, 95] as const;

export type PercentileKey = "p5" | "p25" | "p50" | "p75" | "p95";

export const PERCENTILE_KEYS: readonly PercentileKey[] = [
  "p5",
  "p25",
  "p50",
  "p75",
  "p95",
];

// ---------------------------------------------------------------------------
// API payloads (shapes mirror the service responses verbatim)

export interface ScenarioSummary {
  id: string;
  name: string;
  description: string;
  color: string | null;
  num_members: number;
  num_days: number;
  seed: number;
  has_result: boolean;
}

export interface DampingSpec {
  strength: number;
  start_day: number;
  end_day: number;
  locations: Location[];
  groups?: string[];
}

export interface RangeSpec {
  field: string;
  low: number | number[];
  high: number | number[];
}

export interface ResultInfo {
  num_days: number;
  num_members: number;
  district_ids: string[];
  group_labels: string[];
  percentiles: number[];
  start_date: string | null;
}

export interface ScenarioDetail extends ScenarioSummary {
  dampings: DampingSpec[];
  ranges: RangeSpec[];
  result?: ResultInfo;
}

export interface MapDistrictValue {
  id: string;
  name: string;
  value: number;
}

export interface MapResponse {
  scenario_id: string;
  compartment: CompartmentCode;
  day: number;
  group: string;
  percentile: number;
  districts: MapDistrictValue[];
}

export type BandSeries = Record<PercentileKey, number[]>;

export interface ChartCurve {
  id: string;
  name: string;
  color: string | null;
  days: number[];
  bands: BandSeries;
}

export interface ChartResponse {
  compartment: CompartmentCode;
  district: string;
  group: string;
  scenarios: ChartCurve[];
}

export interface TrendInfo {
  direction: "increasing" | "decreasing" | "stable";
  change: number;
}

export interface CardCompartment {
  code: CompartmentCode;
  label: string;
  p5: number;
  p25: number;
  p50: number;
  p75: number;
  p95: number;
  trend: TrendInfo;
}

export interface CardResponse {
  scenario_id: string;
  day: number;
  date: string | null;
  district: string;
  group: string;
  compartments: CardCompartment[];
}

export interface RunState {
  run_id: string;
  scenario_id: string;
  status: "queued" | "running" | "done" | "failed";
  error: string | null;
}

export interface RunRequest {
  name?: string;
  num_members?: number;
  num_days?: number;
  seed?: number;
  ranges?: RangeSpec[];
  dampings?: DampingSpec[];
}

export interface SearchMatch {
  id: string;
  name: string;
}

export interface SearchResponse {
  query: string;
  results: SearchMatch[];
}

export interface CaseRow {
  date: string;
  confirmed: number;
  deaths: number;
  recovered: number;
  active: number;
}

export interface CaseDataResponse {
  district: string;
  group: string | null;
  records: CaseRow[];
}

// ---------------------------------------------------------------------------
// Client-side selection state

/**
 * The single source of truth every panel renders from. Exactly one value
 * per selection dimension; `visible` only filters which chart layers
 * draw, it never changes what is fetched.
 */
export interface AppContext {
  scenario: string;
  compartment: CompartmentCode;
  day: number;
  district: string;
  group: string;
  visible: ReadonlySet<string>;
}
