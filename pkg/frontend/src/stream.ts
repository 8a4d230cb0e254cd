// NDJSON event-stream consumer with reconnect. One instance feeds the whole
// UI: events come out in stream order, and the connection status flips to
// "stale" the moment the stream drops, until a reconnect succeeds.

import type { Connection, StreamEvent } from "./types.js";
import type { FetchLike } from "./api.js";

export interface StreamCallbacks {
  onEvent(event: StreamEvent): void;
  onStatus(connection: Connection): void;
}

export interface StreamOptions {
  fetchFn?: FetchLike;
  baseDelayMs?: number;
  maxDelayMs?: number;
  /** Injectable for tests; default is a real setTimeout sleep. */
  sleep?(ms: number): Promise<void>;
}

const EVENT_TYPES = new Set(["route", "segment", "toll", "config"]);

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class EventStreamClient {
  private stopped = false;
  private controller: AbortController | null = null;
  private readonly fetchFn: FetchLike;
  private readonly baseDelayMs: number;
  private readonly maxDelayMs: number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(
    private readonly gatewayUrl: string,
    private readonly callbacks: StreamCallbacks,
    options: StreamOptions = {},
  ) {
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.baseDelayMs = options.baseDelayMs ?? 500;
    this.maxDelayMs = options.maxDelayMs ?? 8_000;
    this.sleep = options.sleep ?? defaultSleep;
  }

  /** Consume until stop(); resolves when stopped. */
  async start(): Promise<void> {
    let delay = this.baseDelayMs;
    while (!this.stopped) {
      this.controller = new AbortController();
      try {
        const response = await this.fetchFn(`${this.gatewayUrl}/events`, {
          signal: this.controller.signal,
        });
        if (!response.ok || !response.body) {
          throw new Error(`stream returned ${response.status}`);
        }
        this.callbacks.onStatus("live");
        delay = this.baseDelayMs; // healthy connection resets the backoff
        await this.consume(response.body);
      } catch {
        // fall through to the retry path
      }
      if (this.stopped) {
        break;
      }
      this.callbacks.onStatus("stale");
      await this.sleep(delay);
      delay = Math.min(delay * 2, this.maxDelayMs);
    }
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) {
          break;
        }
        buffer += decoder.decode(value, { stream: true });
        let newline: number;
        while ((newline = buffer.indexOf("\n")) >= 0) {
          const line = buffer.slice(0, newline).trim();
          buffer = buffer.slice(newline + 1);
          if (line) {
            this.dispatch(line);
          }
        }
      }
    } finally {
      reader.releaseLock();
    }
  }

  private dispatch(line: string): void {
    let parsed: unknown;
    try {
      parsed = JSON.parse(line);
    } catch {
      return; // a torn or foreign line must not kill the stream
    }
    const event = parsed as StreamEvent;
    if (event && typeof event === "object" && EVENT_TYPES.has(event.type)) {
      this.callbacks.onEvent(event);
    }
  }
}
