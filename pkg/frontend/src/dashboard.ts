/**
 * Dashboard orchestration. One context store drives four panels
 * (scenario cards, compartment list, timeline chart, choropleth map);
 * interactions update the context and refetch exactly the panels whose
 * query the change invalidates. Superseded in-flight queries are
 * dropped, never rendered.
 */
import type { ApiClient } from "./api.js";
import { ApiError } from "./api.js";
import type {
  AppContext,
  CardResponse,
  ChartResponse,
  CompartmentCode,
  MapResponse,
  RunState,
  ScenarioSummary,
  SearchMatch,
} from "./types.js";
import {
  addVisible,
  defaultContext,
  pickDay,
  selectCompartment,
  selectDistrict,
  selectScenario,
  setGroupFilter,
  toggleVisible,
  type ContextUpdate,
} from "./context.js";
import {
  cardQuery,
  chartQuery,
  mapQuery,
  panelsToRefetch,
  type PanelName,
} from "./queries.js";
import type { DampingDraft, FieldError } from "./sliders.js";
import { buildRunRequest, pollDelayMs, validateDraft } from "./sliders.js";

export type PanelStatus = "idle" | "loading" | "ready" | "error";

export interface PanelState<T> {
  status: PanelStatus;
  data: T | null;
  error: string | null;
}

export interface RunTracker {
  runId: string;
  scenarioId: string;
  status: RunState["status"];
  error: string | null;
}

export interface SliderPanelState {
  fieldErrors: FieldError[];
  /** Message from a server-side rejection (HTTP 422). */
  serverError: string | null;
}

type Sleep = (ms: number) => Promise<void>;

const realSleep: Sleep = (ms) =>
  new Promise((resolve) => setTimeout(resolve, ms));

function emptyPanel<T>(): PanelState<T> {
  return { status: "idle", data: null, error: null };
}

export class Dashboard {
  readonly api: ApiClient;

  catalog: ScenarioSummary[] = [];
  context!: AppContext;

  map: PanelState<MapResponse> = emptyPanel();
  chart: PanelState<ChartResponse> = emptyPanel();
  card: PanelState<CardResponse> = emptyPanel();
  sliders: SliderPanelState = { fieldErrors: [], serverError: null };
  runs: RunTracker[] = [];

  private readonly sleep: Sleep;
  private readonly requestSeq: Record<PanelName, number> = {
    map: 0,
    chart: 0,
    card: 0,
  };

  constructor(api: ApiClient, options: { sleep?: Sleep } = {}) {
    this.api = api;
    this.sleep = options.sleep ?? realSleep;
  }

  /** Longest horizon across the catalog; date picks clamp to it. */
  get horizon(): number {
    return Math.max(0, ...this.catalog.map((s) => s.num_days));
  }

  async init(): Promise<void> {
    this.catalog = await this.api.listScenarios();
    this.context = defaultContext(this.catalog);
    await this.refetch(["map", "chart", "card"]);
  }

  // -- interactions ---------------------------------------------------------

  async onCardClick(scenarioId: string): Promise<void> {
    if (!this.catalog.some((s) => s.id === scenarioId)) {
      throw new Error(`unknown scenario ${scenarioId}`);
    }
    await this.apply(selectScenario(this.context, scenarioId));
  }

  async onCompartmentSelect(compartment: CompartmentCode): Promise<void> {
    await this.apply(selectCompartment(this.context, compartment));
  }

  async onChartDatePick(day: number): Promise<void> {
    await this.apply(pickDay(this.context, day, this.horizon));
  }

  async onMapDistrictClick(districtId: string): Promise<void> {
    await this.apply(selectDistrict(this.context, districtId));
  }

  async onSearchSelect(match: SearchMatch): Promise<void> {
    await this.apply(selectDistrict(this.context, match.id));
  }

  async onGroupFilterChange(group: string): Promise<void> {
    await this.apply(setGroupFilter(this.context, group));
  }

  /** Chart-layer visibility: no refetch, render-side filtering only. */
  onVisibilityToggle(scenarioId: string): void {
    this.context = toggleVisible(this.context, scenarioId).context;
  }

  async searchDistricts(q: string): Promise<SearchMatch[]> {
    if (q.trim() === "") return [];
    const response = await this.api.searchDistricts(q);
    return response.results;
  }

  // -- triggered runs -------------------------------------------------------

  /**
   * Commit the intervention sliders: validate inline, skip the request
   * when nothing changed, otherwise POST and poll to completion. On
   * success the derived scenario joins the catalog, the chart, and the
   * visible set.
   */
  async onSliderCommit(
    scenarioId: string,
    drafts: DampingDraft[],
    name?: string,
  ): Promise<RunTracker | null> {
    this.sliders = { fieldErrors: [], serverError: null };
    const fieldErrors = drafts.flatMap((draft) => validateDraft(draft));
    if (fieldErrors.length > 0) {
      this.sliders = { fieldErrors, serverError: null };
      return null;
    }
    const base = await this.api.getScenario(scenarioId);
    const request = buildRunRequest(drafts, base.dampings, name);
    if (request === null) return null;

    let state: RunState;
    try {
      state = await this.api.triggerRun(scenarioId, request);
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        this.sliders = { fieldErrors: [], serverError: error.detail };
        return null;
      }
      throw error;
    }
    const tracker: RunTracker = {
      runId: state.run_id,
      scenarioId: state.scenario_id,
      status: state.status,
      error: state.error,
    };
    this.runs.push(tracker);
    await this.pollRun(tracker);
    return tracker;
  }

  /** Poll a run with exponential backoff (1s doubling, 15s ceiling). */
  private async pollRun(tracker: RunTracker): Promise<void> {
    for (let attempt = 0; ; attempt++) {
      if (tracker.status === "done" || tracker.status === "failed") break;
      await this.sleep(pollDelayMs(attempt));
      const state = await this.api.getRunStatus(tracker.runId);
      tracker.status = state.status;
      tracker.error = state.error;
    }
    if (tracker.status === "done") {
      await this.absorbRunResult(tracker.scenarioId);
    }
  }

  /** Refresh catalog and chart so the finished run is comparable. */
  private async absorbRunResult(scenarioId: string): Promise<void> {
    this.catalog = await this.api.listScenarios();
    this.context = addVisible(this.context, scenarioId).context;
    await this.refetch(["chart"]);
  }

  // -- fetch plumbing -------------------------------------------------------

  private async apply(update: ContextUpdate): Promise<void> {
    if (update.changed.length === 0) return;
    this.context = update.context;
    await this.refetch(panelsToRefetch(update.changed));
  }

  private async refetch(panels: PanelName[]): Promise<void> {
    await Promise.all(panels.map((panel) => this.fetchPanel(panel)));
  }

  private async fetchPanel(panel: PanelName): Promise<void> {
    const ticket = ++this.requestSeq[panel];
    const fresh = () => this.requestSeq[panel] === ticket;
    const state = this[panel] as PanelState<unknown>;
    state.status = "loading";
    try {
      let data: unknown;
      if (panel === "map") {
        data = await this.api.getMap(mapQuery(this.context));
      } else if (panel === "chart") {
        data = await this.api.getChart(chartQuery(this.context));
      } else {
        data = await this.api.getCard(cardQuery(this.context));
      }
      if (!fresh()) return; // superseded by a newer query for this panel
      state.data = data;
      state.status = "ready";
      state.error = null;
    } catch (error) {
      if (!fresh()) return;
      state.status = "error";
      state.error = error instanceof Error ? error.message : String(error);
    }
  }
}
