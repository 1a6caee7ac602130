// @vitest-environment jsdom
//
// Thin-client conformance: with a mocked payload, every score/rank/length
// the DOM shows must equal the payload field, nothing recomputed.

import { describe, expect, it } from "vitest";

import { QueryRow } from "../src/api.js";
import { renderDetail, renderGallery, renderPrOverlay, renderSuggestions } from "../src/render.js";
import { Selected } from "../src/state.js";

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

const cropUrl = (id: string, n: number) => `http://svc/sequences/${id}/crops/${n}`;

describe("gallery rendering", () => {
  const payload = [
    row("video_000:0001", 0.8312345678, 1, [0.1, 0.8312345678, 0.4]),
    row("video_001:0002", 0.44, 2, [0.44, 0.2]),
    row("video_001:0007", -0.125, 3, [-0.125]),
  ];

  it("renders every score, rank and length verbatim from the payload", () => {
    const container = document.createElement("main");
    renderGallery(container, payload, { cropUrl, onSelect: () => {} });
    const cards = Array.from(container.querySelectorAll<HTMLElement>(".card"));
    expect(cards.length).toBe(payload.length);
    cards.forEach((card, i) => {
      const want = payload[i]!;
      expect(card.dataset.score).toBe(String(want.score));
      expect(card.dataset.rank).toBe(String(want.rank));
      expect(card.dataset.length).toBe(String(want.length));
      expect(card.querySelector(".card-id")!.textContent).toBe(want.sequence_id);
      expect(card.querySelector(".score")!.textContent).toBe(`s=${want.score.toFixed(4)}`);
      expect(card.querySelector(".len")!.textContent).toBe(`n=${want.length}`);
      expect(card.querySelector(".rank")!.textContent).toBe(`#${want.rank}`);
      expect(card.querySelector<HTMLImageElement>(".thumb")!.src).toBe(
        cropUrl(want.sequence_id, want.best_crop.index),
      );
    });
  });

  it("keeps the payload order (already ranked by the service)", () => {
    const container = document.createElement("main");
    renderGallery(container, payload, { cropUrl, onSelect: () => {} });
    const ids = Array.from(container.querySelectorAll<HTMLElement>(".card")).map(
      (c) => c.dataset.sequenceId,
    );
    expect(ids).toEqual(payload.map((r) => r.sequence_id));
  });

  it("clicking a card reports its sequence id", () => {
    const container = document.createElement("main");
    let picked = "";
    renderGallery(container, payload, { cropUrl, onSelect: (id) => (picked = id) });
    container.querySelectorAll<HTMLElement>(".card")[1]!.click();
    expect(picked).toBe("video_001:0002");
  });

  it("shows an empty state for zero results", () => {
    const container = document.createElement("main");
    renderGallery(container, [], { cropUrl, onSelect: () => {} });
    expect(container.querySelector(".empty")).not.toBeNull();
  });
});

describe("detail rendering", () => {
  const selected: Selected = {
    record: {
      sequence_id: "video_000:0001",
      source_video: "video_000",
      length: 3,
      crops: [0, 1, 2].map((i) => ({
        frame_index: 10 + i,
        bbox: [0, 0, 4, 4],
        crop_box: [0, 0, 9, 9],
        centroid: [2, 2],
      })),
    },
    similarities: [0.1, 0.83, 0.4],
    bestIndex: 1,
    score: 0.83,
  };

  it("renders one cell per crop with the payload similarities", () => {
    const container = document.createElement("section");
    renderDetail(container, selected, { cropUrl, onBack: () => {} });
    const cells = Array.from(container.querySelectorAll<HTMLElement>(".crop"));
    expect(cells.length).toBe(3);
    cells.forEach((cell, i) => {
      expect(cell.dataset.similarity).toBe(String(selected.similarities[i]));
      expect(cell.dataset.position).toBe(String(i));
    });
  });

  it("highlights exactly the best crop and echoes the gallery score", () => {
    const container = document.createElement("section");
    renderDetail(container, selected, { cropUrl, onBack: () => {} });
    const best = Array.from(container.querySelectorAll<HTMLElement>(".crop.best"));
    expect(best.length).toBe(1);
    expect(best[0]!.dataset.position).toBe("1");
    expect(best[0]!.dataset.similarity).toBe(String(selected.score));
    expect(container.querySelector<HTMLElement>(".detail-meta")!.dataset.score).toBe(
      String(selected.score),
    );
  });

  it("back button fires the callback", () => {
    const container = document.createElement("section");
    let back = false;
    renderDetail(container, selected, { cropUrl, onBack: () => (back = true) });
    container.querySelector<HTMLElement>(".back")!.click();
    expect(back).toBe(true);
  });
});

describe("suggestions", () => {
  it("renders clickable correction chips", () => {
    const container = document.createElement("section");
    let picked = "";
    renderSuggestions(container, "unknown term 'dgo'", ["dog", "box"], (t) => (picked = t));
    const chips = Array.from(container.querySelectorAll<HTMLElement>(".chip"));
    expect(chips.map((c) => c.textContent)).toEqual(["dog", "box"]);
    chips[0]!.click();
    expect(picked).toBe("dog");
  });
});

describe("PR overlay", () => {
  it("stays hidden without eval data", () => {
    const container = document.createElement("section");
    renderPrOverlay(container, null);
    expect(container.classList.contains("hidden")).toBe(true);
  });

  it("draws one polyline per query curve", () => {
    const container = document.createElement("section");
    renderPrOverlay(container, {
      retrieval_curves: {
        dog: { threshold: [1.2, 0.8, 0.3], precision: [1, 1, 0.5], recall: [0, 0.5, 1] },
        ball: { threshold: [1.1, 0.4], precision: [1, 0.7], recall: [0, 1] },
      },
    });
    const lines = Array.from(container.querySelectorAll("polyline"));
    expect(lines.map((l) => l.getAttribute("data-query")).sort()).toEqual(["ball", "dog"]);
    expect(container.classList.contains("hidden")).toBe(false);
  });
});
