import { describe, expect, it } from "vitest";

import { Client, QueryResponse, QueryRow, SequenceRecord } from "../src/api.js";
import { Console } from "../src/state.js";

function row(id: string, score: number, rank: number, sims: number[]): QueryRow {
  const best = sims.indexOf(Math.max(...sims));
  return {
    sequence_id: id,
    score,
    rank,
    length: sims.length,
    source_video: "vid",
    best_crop: {
      index: best,
      frame_index: best,
      bbox: [0, 0, 4, 4],
      crop_box: [0, 0, 9, 9],
      centroid: [2, 2],
    },
    crop_similarities: sims,
  };
}

function record(id: string, n: number): SequenceRecord {
  return {
    sequence_id: id,
    source_video: "vid",
    length: n,
    crops: Array.from({ length: n }, (_, i) => ({
      frame_index: i,
      bbox: [0, 0, 4, 4],
      crop_box: [0, 0, 9, 9],
      centroid: [2, 2],
    })),
  };
}

type Deferred = {
  resolve: (body: unknown) => void;
  reject: (status: number, message: string) => void;
};

/** fetch stub whose responses resolve only when the test says so */
function deferredFetch() {
  const pending: { url: string; deferred: Deferred }[] = [];
  const fetchFn = (url: string) =>
    new Promise<Response>((resolve) => {
      pending.push({
        url,
        deferred: {
          resolve: (body) =>
            resolve(new Response(JSON.stringify(body), { status: 200 })),
          reject: (status, message) =>
            resolve(
              new Response(JSON.stringify({ error: { type: "err", message } }), { status }),
            ),
        },
      });
    });
  return { fetchFn, pending };
}

describe("Console query flow", () => {
  it("applies the response of a completed query", async () => {
    const { fetchFn, pending } = deferredFetch();
    const console_ = new Console(new Client("http://svc", fetchFn));
    console_.setTerm("dog");
    const done = console_.runQuery();
    const body: QueryResponse = { tau: 0.25, count: 1, results: [row("a", 0.9, 1, [0.9])] };
    pending[0]!.deferred.resolve(body);
    expect(await done).toBe(true);
    expect(console_.state.results).toEqual(body.results);
    expect(console_.state.lastError).toBeNull();
  });

  it("discards a stale response when a newer query was issued", async () => {
    const { fetchFn, pending } = deferredFetch();
    const console_ = new Console(new Client("http://svc", fetchFn));
    console_.setTerm("dog");
    const first = console_.runQuery(); // query A, response delayed
    console_.setTerm("ball");
    const second = console_.runQuery(); // query B issued before A returns
    pending[1]!.deferred.resolve({ tau: 0.25, count: 1, results: [row("b", 0.8, 1, [0.8])] });
    expect(await second).toBe(true);
    // A's (older) response arrives afterwards and must be dropped
    pending[0]!.deferred.resolve({ tau: 0.25, count: 1, results: [row("a", 0.9, 1, [0.9])] });
    expect(await first).toBe(false);
    expect(console_.state.results!.map((r) => r.sequence_id)).toEqual(["b"]);
  });

  it("keeps the newer response even when the stale one errors", async () => {
    const { fetchFn, pending } = deferredFetch();
    const console_ = new Console(new Client("http://svc", fetchFn));
    console_.setTerm("dog");
    const first = console_.runQuery();
    const second = console_.runQuery();
    pending[1]!.deferred.resolve({ tau: 0.25, count: 0, results: [] });
    await second;
    pending[0]!.deferred.reject(500, "boom");
    expect(await first).toBe(false);
    expect(console_.state.lastError).toBeNull();
    expect(console_.state.results).toEqual([]);
  });

  it("surfaces service errors verbatim with suggestions", async () => {
    const fetchFn = () =>
      Promise.resolve(
        new Response(
          JSON.stringify({
            error: {
              type: "unknown_term",
              message: "unknown vocabulary term 'dgo'",
              suggestions: ["dog", "box"],
            },
          }),
          { status: 404 },
        ),
      );
    const console_ = new Console(new Client("http://svc", fetchFn));
    console_.setTerm("dgo");
    await console_.runQuery();
    expect(console_.state.lastError?.message).toBe("unknown vocabulary term 'dgo'");
    expect(console_.state.lastError?.suggestions).toEqual(["dog", "box"]);
    expect(console_.state.results).toBeNull(); // previous results untouched
  });

  it("rejects malformed raw vectors client-side", async () => {
    const console_ = new Console(new Client("http://svc", () => {
      throw new Error("must not hit the network");
    }));
    console_.setMode("vector");
    console_.setVectorText("[1, \"x\"]");
    await console_.runQuery();
    expect(console_.state.lastError?.type).toBe("bad_vector");
  });
});

describe("detail view navigation", () => {
  it("inspect pulls the record and back preserves the query state", async () => {
    const bodies: Record<string, unknown> = {
      "http://svc/query": { tau: 0.4, count: 1, results: [row("a", 0.7, 1, [0.2, 0.7, 0.5])] },
      "http://svc/sequences/a": record("a", 3),
    };
    const fetchFn = (url: string) =>
      Promise.resolve(new Response(JSON.stringify(bodies[url]), { status: 200 }));
    const console_ = new Console(new Client("http://svc", fetchFn));
    console_.setTerm("dog");
    console_.setTau(0.4);
    await console_.runQuery();
    await console_.inspect("a", 123);
    expect(console_.state.selected?.record.sequence_id).toBe("a");
    expect(console_.state.selected?.bestIndex).toBe(1);
    // the highlighted crop's similarity equals the gallery card score
    expect(
      console_.state.selected!.similarities[console_.state.selected!.bestIndex],
    ).toBe(console_.state.selected!.score);
    const scroll = console_.back();
    expect(scroll).toBe(123);
    expect(console_.state.selected).toBeNull();
    expect(console_.state.term).toBe("dog");
    expect(console_.state.tau).toBe(0.4);
    expect(console_.state.results!.map((r) => r.sequence_id)).toEqual(["a"]);
  });

  it("renders a not-found state for unknown sequences", async () => {
    const fetchFn = (url: string) => {
      if (url.endsWith("/query")) {
        return Promise.resolve(
          new Response(
            JSON.stringify({ tau: 0, count: 1, results: [row("gone", 0.5, 1, [0.5])] }),
            { status: 200 },
          ),
        );
      }
      return Promise.resolve(
        new Response(
          JSON.stringify({ error: { type: "unknown_sequence", message: "no sequence" } }),
          { status: 404 },
        ),
      );
    };
    const console_ = new Console(new Client("http://svc", fetchFn));
    console_.setTerm("dog");
    await console_.runQuery();
    await console_.inspect("gone");
    expect(console_.state.selected).toBeNull();
    expect(console_.state.lastError?.type).toBe("unknown_sequence");
  });
});

describe("eval report", () => {
  it("tolerates a service without /eval", async () => {
    const fetchFn = () =>
      Promise.resolve(
        new Response(JSON.stringify({ error: { type: "no_eval_report", message: "none" } }), {
          status: 404,
        }),
      );
    const console_ = new Console(new Client("http://svc", fetchFn));
    await console_.refreshEvalReport();
    expect(console_.state.evalReport).toBeNull();
  });
});
