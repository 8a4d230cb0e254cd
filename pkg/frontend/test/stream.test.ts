import { describe, expect, it } from "vitest";

import { EventStreamClient } from "../src/stream.js";
import type { Connection, StreamEvent } from "../src/types.js";

function ndjsonResponse(chunks: string[]): Response {
  const encoder = new TextEncoder();
  const body = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const chunk of chunks) {
        controller.enqueue(encoder.encode(chunk));
      }
      controller.close();
    },
  });
  return new Response(body, { status: 200, headers: { "Content-Type": "application/x-ndjson" } });
}

interface Script {
  events: StreamEvent[];
  statuses: Connection[];
  delays: number[];
}

/** Run the client against scripted connections until it gets stopped. */
async function run(
  connections: (() => Response | Error)[],
  options: { stopAfterEvents?: number; stopAfterConnections?: number } = {},
): Promise<Script> {
  const script: Script = { events: [], statuses: [], delays: [] };
  let attempt = 0;
  let resolveDone: () => void = () => {};
  const done = new Promise<void>((resolve) => {
    resolveDone = resolve;
  });

  const client = new EventStreamClient(
    "http://gw.test",
    {
      onEvent: (event) => {
        script.events.push(event);
        if (options.stopAfterEvents && script.events.length >= options.stopAfterEvents) {
          client.stop();
          resolveDone();
        }
      },
      onStatus: (connection) => {
        script.statuses.push(connection);
      },
    },
    {
      baseDelayMs: 100,
      maxDelayMs: 400,
      sleep: async (ms) => {
        script.delays.push(ms);
      },
      fetchFn: async () => {
        const next = connections[Math.min(attempt, connections.length - 1)];
        attempt += 1;
        if (options.stopAfterConnections && attempt > options.stopAfterConnections) {
          client.stop();
          resolveDone();
          return new Response(null, { status: 503 });
        }
        const result = next();
        if (result instanceof Error) {
          throw result;
        }
        return result;
      },
    },
  );

  await Promise.race([client.start(), done]);
  client.stop();
  return script;
}

describe("EventStreamClient", () => {
  it("parses NDJSON lines even when chunks split mid-line", async () => {
    const lineA = JSON.stringify({ type: "toll", payload: { vehicle_id: "v1", increment_eur: "0.010000", cumulative_eur: "0.200000", distance_m_total: 1, trace: { trace_id: "t", vehicle_id: "v1", seq: 1 } } });
    const lineB = JSON.stringify({ type: "config", payload: { vehicle_count: 5, update_interval_ms: 100, gps_noise_m: 0, seed: null } });
    const script = await run(
      [() => ndjsonResponse([lineA.slice(0, 10), lineA.slice(10) + "\n" + lineB.slice(0, 4), lineB.slice(4) + "\n"])],
      { stopAfterEvents: 2 },
    );
    expect(script.events.map((e) => e.type)).toEqual(["toll", "config"]);
    expect(script.statuses[0]).toBe("live");
  });

  it("skips torn or foreign lines without dying", async () => {
    const good = JSON.stringify({ type: "config", payload: { vehicle_count: 5, update_interval_ms: 100, gps_noise_m: 0, seed: null } });
    const script = await run(
      [() => ndjsonResponse(["this is not json\n", '{"type": "mystery", "payload": {}}\n', good + "\n"])],
      { stopAfterEvents: 1 },
    );
    expect(script.events).toHaveLength(1);
    expect(script.events[0].type).toBe("config");
  });

  it("marks the state stale on drop and reconnects with doubling backoff", async () => {
    const script = await run(
      [
        () => new Error("refused"),
        () => new Error("refused"),
        () => new Error("refused"),
        () => ndjsonResponse([]),
      ],
      { stopAfterConnections: 5 },
    );
    // three failures, then a success (empty stream), then the stop sentinel
    expect(script.delays.slice(0, 3)).toEqual([100, 200, 400]);
    expect(script.statuses.filter((s) => s === "stale").length).toBeGreaterThanOrEqual(3);
    expect(script.statuses).toContain("live");
  });

  it("resets the backoff after a healthy connection", async () => {
    const script = await run(
      [
        () => new Error("refused"),
        () => new Error("refused"),
        () => ndjsonResponse([]), // connects, then the stream ends
        () => new Error("refused"),
      ],
      { stopAfterConnections: 5 },
    );
    // 100, 200 while down, then the post-success drop restarts at 100
    expect(script.delays.slice(0, 4)).toEqual([100, 200, 100, 200]);
  });

  it("stops cleanly without reconnecting", async () => {
    const script = await run([() => ndjsonResponse([])], { stopAfterConnections: 1 });
    expect(script.events).toEqual([]);
  });
});
