/**
 * Intervention slider panel logic: client-side validation of damping
 * overrides (mirroring the service's invariants), change detection so
 * untouched sliders never POST, and the status-polling backoff.
 */
import type { DampingSpec, RunRequest } from "./types.js";
import { LOCATIONS } from "./types.js";

/** Raw slider values before validation. */
export interface DampingDraft {
  strength: number;
  start_day: number;
  end_day: number;
  locations: string[];
  groups?: string[];
}

export interface FieldError {
  field: "strength" | "start_day" | "end_day" | "locations" | "groups";
  message: string;
}

/**
 * Validate one draft against the same rules the service enforces, so a
 * bad commit fails inline instead of as a 422 round-trip.
 */
export function validateDraft(
  draft: DampingDraft,
  knownGroups?: readonly string[],
): FieldError[] {
  const errors: FieldError[] = [];
  if (!(draft.strength >= 0 && draft.strength <= 1)) {
    errors.push({
      field: "strength",
      message: "strength must be between 0 and 1",
    });
  }
  if (!Number.isInteger(draft.start_day) || draft.start_day < 0) {
    errors.push({
      field: "start_day",
      message: "start day must be a non-negative whole day",
    });
  }
  if (!Number.isInteger(draft.end_day)) {
    errors.push({
      field: "end_day",
      message: "end day must be a whole day",
    });
  } else if (draft.end_day <= draft.start_day) {
    errors.push({
      field: "end_day",
      message: "end day must come after the start day",
    });
  }
  if (draft.locations.length === 0) {
    errors.push({
      field: "locations",
      message: "pick at least one contact location",
    });
  }
  for (const location of draft.locations) {
    if (!(LOCATIONS as readonly string[]).includes(location)) {
      errors.push({
        field: "locations",
        message: `unknown location ${location}`,
      });
    }
  }
  if (draft.groups !== undefined && knownGroups !== undefined) {
    for (const group of draft.groups) {
      if (!knownGroups.includes(group)) {
        errors.push({ field: "groups", message: `unknown age group ${group}` });
      }
    }
  }
  return errors;
}

function normalize(damping: DampingSpec | DampingDraft): string {
  return JSON.stringify({
    strength: damping.strength,
    start_day: damping.start_day,
    end_day: damping.end_day,
    locations: [...damping.locations].sort(),
    groups: damping.groups ? [...damping.groups].sort() : null,
  });
}

/** True when the drafts describe exactly the scenario's current schedule. */
export function draftsEqualBase(
  drafts: DampingDraft[],
  base: DampingSpec[],
): boolean {
  if (drafts.length !== base.length) return false;
  const left = drafts.map(normalize).sort();
  const right = base.map(normalize).sort();
  return left.every((entry, i) => entry === right[i]);
}

/**
 * Build the run request for committed sliders, or null when nothing
 * changed (no request must be sent then). Throws on invalid drafts;
 * callers validate first for inline errors.
 */
export function buildRunRequest(
  drafts: DampingDraft[],
  base: DampingSpec[],
  name?: string,
): RunRequest | null {
  if (draftsEqualBase(drafts, base)) return null;
  for (const draft of drafts) {
    const errors = validateDraft(draft);
    if (errors.length > 0) {
      throw new Error(errors[0]!.message);
    }
  }
  const request: RunRequest = {
    dampings: drafts.map((draft) => ({
      strength: draft.strength,
      start_day: draft.start_day,
      end_day: draft.end_day,
      locations: [...draft.locations] as DampingSpec["locations"],
      ...(draft.groups !== undefined ? { groups: [...draft.groups] } : {}),
    })),
  };
  if (name !== undefined) request.name = name;
  return request;
}

/** Polling delays in milliseconds: 1s doubling up to a 15s ceiling. */
export function pollDelayMs(attempt: number): number {
  return Math.min(1000 * 2 ** attempt, 15000);
}
