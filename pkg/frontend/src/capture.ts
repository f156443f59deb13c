/**
 * Capture state machine, independent of the DOM.
 *
 * Buffers sensor readings and flushes them to the capture server at least
 * every 200 ms or every 64 samples (whichever comes first), queues keydowns
 * per 4-digit target, and walks the participant through every PIN in the
 * list `reps` times in randomized order. All posts are serialized through
 * one promise chain so batches can never arrive reordered.
 */

import {
  CreateSessionBody,
  EventPayload,
  EventsBody,
  SamplePayload,
  SamplesBody,
  Triple,
} from "./schema.js";

export const FLUSH_INTERVAL_MS = 200;
export const FLUSH_MAX_SAMPLES = 64;

export interface SensorReading {
  acc?: Triple | null;
  accG?: Triple | null;
  rotR?: Triple | null;
  ori?: Triple | null;
  interval?: number | null;
}

export interface Transport {
  /** POST a JSON body; resolve with the parsed JSON response, reject on any
   * non-2xx status or network failure. */
  post(path: string, body: unknown): Promise<Record<string, unknown>>;
}

export interface CaptureOptions {
  user: string;
  device: string;
  pins: string[];
  reps: number;
  transport: Transport;
  /** milliseconds-resolution monotonic clock; injectable for tests */
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
  random?: () => number;
  onStateChange?: (session: CaptureSession) => void;
}

export type CapturePhase = "running" | "finished" | "error";

function shuffled<T>(items: T[], random: () => number): T[] {
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(random() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

export function fetchTransport(serverUrl: string): Transport {
  const base = serverUrl.replace(/\/$/, "");
  return {
    async post(path: string, body: unknown) {
      const resp = await fetch(base + path, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
      const payload = (await resp.json().catch(() => ({}))) as Record<string, unknown>;
      if (!resp.ok) {
        throw new Error(`${path} failed: ${resp.status} ${payload.error ?? ""}`);
      }
      return payload;
    },
  };
}

export class CaptureSession {
  readonly sessionId: string;
  phase: CapturePhase = "running";
  lastError: string | null = null;

  private readonly targets: string[];
  private targetIndex = 0;
  private enteredDigits: number[] = [];
  private pendingEvents: EventPayload[] = [];

  private buffer: SamplePayload[] = [];
  private flushTimer: unknown = null;
  private lastSampleT = -1;
  private readonly t0: number;
  private sendChain: Promise<void> = Promise.resolve();

  private readonly opts: Required<Pick<CaptureOptions, "now" | "setTimer" | "clearTimer" | "random">> &
    CaptureOptions;

  sentSamples = 0;
  sentEvents = 0;

  private constructor(sessionId: string, opts: CaptureOptions) {
    this.sessionId = sessionId;
    this.opts = {
      now: () => performance.now(),
      setTimer: (fn, ms) => setTimeout(fn, ms),
      clearTimer: (h) => clearTimeout(h as number),
      random: Math.random,
      ...opts,
    };
    const repeated: string[] = [];
    for (let r = 0; r < opts.reps; r++) repeated.push(...opts.pins);
    this.targets = shuffled(repeated, this.opts.random);
    this.t0 = this.opts.now();
  }

  /** Create a server session and return a running capture. */
  static async start(opts: CaptureOptions): Promise<CaptureSession> {
    if (opts.pins.length === 0) throw new Error("PIN list is empty");
    const body: CreateSessionBody = { user: opts.user, device: opts.device };
    const created = await opts.transport.post("/v1/sessions", body);
    const id = created.id;
    if (typeof id !== "string" || !id) throw new Error("server did not return a session id");
    return new CaptureSession(id, opts);
  }

  get currentTarget(): string | null {
    return this.targetIndex < this.targets.length ? this.targets[this.targetIndex] : null;
  }

  get digitsEntered(): number {
    return this.enteredDigits.length;
  }

  get targetsRemaining(): number {
    return this.targets.length - this.targetIndex;
  }

  private elapsed(): number {
    return this.opts.now() - this.t0;
  }

  private notify(): void {
    this.opts.onStateChange?.(this);
  }

  private fail(err: unknown): void {
    if (this.phase === "running") {
      this.phase = "error";
      this.lastError = err instanceof Error ? err.message : String(err);
      this.notify();
    }
  }

  private enqueue(fn: () => Promise<void>): Promise<void> {
    this.sendChain = this.sendChain.then(fn).catch((err) => this.fail(err));
    return this.sendChain;
  }

  /** Feed one sensor reading; channels absent in the event stay null. */
  onSensorReading(reading: SensorReading): void {
    if (this.phase !== "running") return;
    let t = this.elapsed();
    if (t <= this.lastSampleT) t = this.lastSampleT + 1e-3;  // server needs strict order
    this.lastSampleT = t;
    this.buffer.push({
      t,
      acc: reading.acc ?? null,
      accG: reading.accG ?? null,
      rotR: reading.rotR ?? null,
      ori: reading.ori ?? null,
      interval: reading.interval ?? null,
    });
    if (this.buffer.length >= FLUSH_MAX_SAMPLES) {
      this.flushSamples();
    } else if (this.flushTimer === null) {
      this.flushTimer = this.opts.setTimer(() => this.flushSamples(), FLUSH_INTERVAL_MS);
    }
  }

  flushSamples(): Promise<void> {
    if (this.flushTimer !== null) {
      this.opts.clearTimer(this.flushTimer);
      this.flushTimer = null;
    }
    if (this.buffer.length === 0) return this.sendChain;
    const body: SamplesBody = { samples: this.buffer };
    this.buffer = [];
    return this.enqueue(async () => {
      await this.opts.transport.post(`/v1/sessions/${this.sessionId}/samples`, body);
      this.sentSamples += body.samples.length;
    });
  }

  /** Handle one numpad press; extra presses beyond 4 are ignored. */
  onKeypress(digit: number): void {
    if (this.phase !== "running") return;
    const target = this.currentTarget;
    if (target === null || this.enteredDigits.length >= 4) return;
    if (!Number.isInteger(digit) || digit < 0 || digit > 9) return;
    this.pendingEvents.push({
      t: this.elapsed(),
      digit,
      idx: this.enteredDigits.length,
      expected: target,
      entered: null,
    });
    this.enteredDigits.push(digit);
    if (this.enteredDigits.length === 4) {
      const entered = this.enteredDigits.join("");
      const events = this.pendingEvents.map((e) => ({ ...e, entered }));
      this.pendingEvents = [];
      this.enteredDigits = [];
      this.targetIndex += 1;
      const body: EventsBody = { events };
      this.enqueue(async () => {
        await this.opts.transport.post(`/v1/sessions/${this.sessionId}/events`, body);
        this.sentEvents += events.length;
      });
      if (this.targetIndex >= this.targets.length) {
        void this.finish();
      }
    }
    this.notify();
  }

  /** Flush whatever is buffered and close the server session. */
  async finish(): Promise<void> {
    this.flushSamples();
    await this.enqueue(async () => {
      await this.opts.transport.post(`/v1/sessions/${this.sessionId}/close`, {});
    });
    if (this.phase === "running") {
      this.phase = "finished";
      this.notify();
    }
  }

  /** Resolves when every queued request has been sent (tests use this). */
  drain(): Promise<void> {
    return this.sendChain;
  }
}
