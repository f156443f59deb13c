/**
 * Wire types and validators for the capture-server API.
 *
 * Sample and event objects use the session-file line fields minus the "k"
 * tag. Validators mirror what the server enforces so tests can check every
 * outgoing payload before it leaves the page.
 */

export type Triple = [number, number, number];

export interface SamplePayload {
  t: number;
  acc: Triple | null;
  accG: Triple | null;
  rotR: Triple | null;
  ori: Triple | null;
  interval: number | null;
}

export interface EventPayload {
  t: number;
  digit: number;
  idx: number;
  expected: string;
  entered: string | null;
}

export interface SamplesBody {
  samples: SamplePayload[];
}

export interface EventsBody {
  events: EventPayload[];
}

export interface CreateSessionBody {
  user: string;
  device: string;
}

const isFiniteNumber = (v: unknown): v is number =>
  typeof v === "number" && Number.isFinite(v);

function isTripleOrNull(v: unknown): v is Triple | null {
  if (v === null) return true;
  return Array.isArray(v) && v.length === 3 && v.every(isFiniteNumber);
}

const isPin = (v: unknown): v is string => typeof v === "string" && /^[0-9]{4}$/.test(v);

export function validateSample(obj: unknown): string[] {
  const errors: string[] = [];
  if (typeof obj !== "object" || obj === null) return ["sample is not an object"];
  const s = obj as Record<string, unknown>;
  if (!isFiniteNumber(s.t) || s.t < 0) errors.push("t must be a finite number >= 0");
  for (const key of ["acc", "accG", "rotR", "ori"] as const) {
    if (!(key in s)) errors.push(`missing channel field ${key}`);
    else if (!isTripleOrNull(s[key])) errors.push(`${key} must be null or [x,y,z]`);
  }
  if (s.interval !== null && s.interval !== undefined) {
    if (!isFiniteNumber(s.interval) || s.interval <= 0) {
      errors.push("interval must be null or a positive number");
    }
  }
  const allowed = new Set(["t", "acc", "accG", "rotR", "ori", "interval"]);
  for (const key of Object.keys(s)) {
    if (!allowed.has(key)) errors.push(`unexpected field ${key}`);
  }
  return errors;
}

export function validateEvent(obj: unknown): string[] {
  const errors: string[] = [];
  if (typeof obj !== "object" || obj === null) return ["event is not an object"];
  const e = obj as Record<string, unknown>;
  if (!isFiniteNumber(e.t) || e.t < 0) errors.push("t must be a finite number >= 0");
  if (!Number.isInteger(e.digit) || (e.digit as number) < 0 || (e.digit as number) > 9) {
    errors.push("digit must be an integer 0..9");
  }
  if (!Number.isInteger(e.idx) || (e.idx as number) < 0 || (e.idx as number) > 3) {
    errors.push("idx must be an integer 0..3");
  }
  if (!isPin(e.expected)) errors.push("expected must be 4 decimal digits");
  if (e.entered !== null && !isPin(e.entered)) {
    errors.push("entered must be null or 4 decimal digits");
  }
  const allowed = new Set(["t", "digit", "idx", "expected", "entered"]);
  for (const key of Object.keys(e)) {
    if (!allowed.has(key)) errors.push(`unexpected field ${key}`);
  }
  return errors;
}

/** Validate a request body for one of the three POST endpoints. */
export function validateBody(path: string, body: unknown): string[] {
  if (typeof body !== "object" || body === null) return ["body is not an object"];
  const b = body as Record<string, unknown>;
  if (path.endsWith("/samples")) {
    if (!Array.isArray(b.samples)) return ["samples must be an array"];
    return b.samples.flatMap((s, i) => validateSample(s).map((e) => `sample ${i}: ${e}`));
  }
  if (path.endsWith("/events")) {
    if (!Array.isArray(b.events)) return ["events must be an array"];
    return b.events.flatMap((e, i) => validateEvent(e).map((m) => `event ${i}: ${m}`));
  }
  if (path.endsWith("/sessions")) {
    const errors: string[] = [];
    if (typeof b.user !== "string") errors.push("user must be a string");
    if (typeof b.device !== "string") errors.push("device must be a string");
    return errors;
  }
  if (path.endsWith("/close")) return [];
  return [`unknown endpoint ${path}`];
}
