// Integration against a real service on a synthetic corpus. Skipped unless
// OODR_SERVICE_URL points at a running `oodr serve` instance, e.g.
//
//   oodr synth --out /tmp/corpus && ... && oodr serve --snapshot ... --port 8787
//   OODR_SERVICE_URL=http://127.0.0.1:8787 npm run test:live

import { describe, expect, it } from "vitest";

import { Client } from "../src/api.js";
import { Console } from "../src/state.js";

const url = process.env.OODR_SERVICE_URL;
const live = url ? describe : describe.skip;

live("against a live service", () => {
  const client = new Client(url ?? "");

  it("tau at -1 returns every sequence the index reports", async () => {
    const health = await client.health();
    expect(health.index).not.toBeNull();
    const terms = await client.vocabulary();
    expect(terms.length).toBeGreaterThan(0);
    const console_ = new Console(client);
    console_.setTerm(terms[0]!);
    console_.setTau(-1);
    await console_.runQuery();
    expect(console_.state.results!.length).toBe(health.index!.sequences);
  });

  it("raising tau monotonically shrinks the gallery without reordering", async () => {
    const terms = await client.vocabulary();
    const console_ = new Console(client);
    console_.setTerm(terms[0]!);
    let previous: string[] | null = null;
    for (const tau of [-1, -0.5, 0, 0.25, 0.5, 0.75, 0.95]) {
      console_.setTau(tau);
      await console_.runQuery();
      expect(console_.state.lastError).toBeNull();
      const ids = console_.state.results!.map((r) => r.sequence_id);
      const scores = console_.state.results!.map((r) => r.score);
      for (const s of scores) expect(s).toBeGreaterThanOrEqual(tau);
      const sorted = [...scores].sort((a, b) => b - a);
      expect(scores).toEqual(sorted);
      if (previous !== null) {
        // survivors keep their relative order from the wider query
        const surviving = previous.filter((id) => ids.includes(id));
        expect(ids).toEqual(surviving);
      }
      previous = ids;
    }
  });

  it("every displayed number equals a service response field", async () => {
    const terms = await client.vocabulary();
    const console_ = new Console(client);
    console_.setTerm(terms[0]!);
    console_.setTau(-1);
    await console_.runQuery();
    const direct = await client.query({ term: terms[0]!, tau: -1 });
    expect(console_.state.results).toEqual(direct.results);
  });

  it("unknown terms surface the service's suggestions", async () => {
    const console_ = new Console(client);
    console_.setTerm("zzzzzz-not-a-term");
    await console_.runQuery();
    expect(console_.state.lastError?.type).toBe("unknown_term");
    expect(console_.state.lastError?.suggestions?.length).toBeGreaterThan(0);
  });

  it("detail view matches the gallery card", async () => {
    const terms = await client.vocabulary();
    const console_ = new Console(client);
    console_.setTerm(terms[0]!);
    console_.setTau(-1);
    await console_.runQuery();
    const card = console_.state.results![0]!;
    await console_.inspect(card.sequence_id);
    const selected = console_.state.selected!;
    expect(selected.record.length).toBe(card.length);
    expect(selected.similarities[selected.bestIndex]).toBe(card.score);
  });
});
