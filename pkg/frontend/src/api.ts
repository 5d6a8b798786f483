/**
 * HTTP client for the scenario service. The `ApiClient` interface is what
 * the dashboard consumes; tests substitute a mock, production code uses
 * `HttpApiClient` against a base URL.
 */
import type {
  CardResponse,
  CaseDataResponse,
  ChartResponse,
  CompartmentCode,
  MapResponse,
  RunRequest,
  RunState,
  ScenarioDetail,
  ScenarioSummary,
  SearchResponse,
} from "./types.js";

export interface MapQuery {
  scenario: string;
  compartment: CompartmentCode;
  day: number;
  group: string;
}

export interface ChartQuery {
  compartment: CompartmentCode;
  district: string;
  group: string;
}

export interface CardQuery {
  scenario: string;
  day: number;
  district: string;
  group: string;
}

export interface ApiClient {
  listScenarios(): Promise<ScenarioSummary[]>;
  getScenario(id: string): Promise<ScenarioDetail>;
  getMap(query: MapQuery): Promise<MapResponse>;
  getChart(query: ChartQuery): Promise<ChartResponse>;
  getCard(query: CardQuery): Promise<CardResponse>;
  triggerRun(scenarioId: string, request: RunRequest | null): Promise<RunState>;
  getRunStatus(runId: string): Promise<RunState>;
  searchDistricts(q: string): Promise<SearchResponse>;
  getCaseData(district: string, group?: string): Promise<CaseDataResponse>;
}

/** Error carrying the HTTP status and the service's `detail` message. */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: unknown };
      if (body && body.detail !== undefined) {
        detail =
          typeof body.detail === "string"
            ? body.detail
            : JSON.stringify(body.detail);
      }
    } catch {
      // keep the status text when the body is not JSON
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class HttpApiClient implements ApiClient {
  private readonly base: string;

  constructor(baseUrl: string) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  private url(path: string, params?: Record<string, string | number>): string {
    const query = params
      ? "?" +
        Object.entries(params)
          .map(
            ([key, value]) =>
              `${encodeURIComponent(key)}=${encodeURIComponent(String(value))}`,
          )
          .join("&")
      : "";
    return `${this.base}${path}${query}`;
  }

  async listScenarios(): Promise<ScenarioSummary[]> {
    return parseOrThrow(await fetch(this.url("/scenarios")));
  }

  async getScenario(id: string): Promise<ScenarioDetail> {
    return parseOrThrow(
      await fetch(this.url(`/scenarios/${encodeURIComponent(id)}`)),
    );
  }

  async getMap(query: MapQuery): Promise<MapResponse> {
    return parseOrThrow(
      await fetch(
        this.url(`/scenarios/${encodeURIComponent(query.scenario)}/map`, {
          compartment: query.compartment,
          day: query.day,
          group: query.group,
        }),
      ),
    );
  }

  async getChart(query: ChartQuery): Promise<ChartResponse> {
    return parseOrThrow(
      await fetch(
        this.url("/chart", {
          compartment: query.compartment,
          district: query.district,
          group: query.group,
        }),
      ),
    );
  }

  async getCard(query: CardQuery): Promise<CardResponse> {
    return parseOrThrow(
      await fetch(
        this.url(`/scenarios/${encodeURIComponent(query.scenario)}/card`, {
          day: query.day,
          district: query.district,
          group: query.group,
        }),
      ),
    );
  }

  async triggerRun(
    scenarioId: string,
    request: RunRequest | null,
  ): Promise<RunState> {
    const init: RequestInit = { method: "POST" };
    if (request !== null) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(request);
    }
    return parseOrThrow(
      await fetch(
        this.url(`/scenarios/${encodeURIComponent(scenarioId)}/runs`),
        init,
      ),
    );
  }

  async getRunStatus(runId: string): Promise<RunState> {
    return parseOrThrow(
      await fetch(this.url(`/runs/${encodeURIComponent(runId)}/status`)),
    );
  }

  async searchDistricts(q: string): Promise<SearchResponse> {
    return parseOrThrow(await fetch(this.url("/districts/search", { q })));
  }

  async getCaseData(
    district: string,
    group?: string,
  ): Promise<CaseDataResponse> {
    const params = group === undefined ? undefined : { group };
    return parseOrThrow(
      await fetch(
        this.url(`/casedata/${encodeURIComponent(district)}`, params),
      ),
    );
  }
}
