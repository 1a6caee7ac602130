/** Wires the console state to the page: term/vector inputs, the debounced
 * live tau slider, the ranked gallery, the crop-strip detail view and the
 * optional PR overlay. */

import { Client } from "./api.js";
import { debounce } from "./debounce.js";
import { renderDetail, renderGallery, renderPrOverlay, renderSuggestions } from "./render.js";
import { Console } from "./state.js";

const TAU_DEBOUNCE_MS = 250;

function must<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function start(baseUrl: string): Console {
  const client = new Client(baseUrl);

  const termInput = must<HTMLInputElement>("term");
  const vectorInput = must<HTMLTextAreaElement>("vector");
  const modeTerm = must<HTMLInputElement>("mode-term");
  const modeVector = must<HTMLInputElement>("mode-vector");
  const tauSlider = must<HTMLInputElement>("tau");
  const tauValue = must<HTMLElement>("tau-value");
  const topKInput = must<HTMLInputElement>("top-k");
  const goButton = must<HTMLButtonElement>("go");
  const status = must<HTMLElement>("status");
  const errorBox = must<HTMLElement>("error");
  const gallery = must<HTMLElement>("gallery");
  const detail = must<HTMLElement>("detail");
  const overlay = must<HTMLElement>("pr-overlay");
  const healthBox = must<HTMLElement>("health");

  const console_ = new Console(client, (state) => {
    tauValue.textContent = state.tau.toFixed(2);
    status.textContent = state.busy ? "querying..." : "";

    errorBox.textContent = "";
    errorBox.classList.toggle("hidden", state.lastError === null);
    if (state.lastError) {
      renderSuggestions(
        errorBox,
        state.lastError.message,
        state.lastError.suggestions ?? [],
        (term) => {
          termInput.value = term;
          console_.setTerm(term);
          void console_.runQuery();
        },
      );
    }

    if (state.selected) {
      gallery.classList.add("hidden");
      detail.classList.remove("hidden");
      renderDetail(detail, state.selected, {
        cropUrl: (id, n) => client.cropUrl(id, n),
        onBack: () => {
          const scroll = console_.back();
          window.scrollTo({ top: scroll });
        },
      });
    } else {
      detail.classList.add("hidden");
      gallery.classList.remove("hidden");
      if (state.results) {
        renderGallery(gallery, state.results, {
          cropUrl: (id, n) => client.cropUrl(id, n),
          onSelect: (id) => void console_.inspect(id, window.scrollY),
        });
      }
    }
    renderPrOverlay(overlay, state.evalReport);
  });

  const debouncedQuery = debounce(() => void console_.runQuery(), TAU_DEBOUNCE_MS);

  termInput.addEventListener("input", () => console_.setTerm(termInput.value));
  termInput.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") void console_.runQuery();
  });
  vectorInput.addEventListener("input", () => console_.setVectorText(vectorInput.value));
  modeTerm.addEventListener("change", () => {
    console_.setMode("term");
    document.body.dataset.mode = "term";
  });
  modeVector.addEventListener("change", () => {
    console_.setMode("vector");
    document.body.dataset.mode = "vector";
  });
  tauSlider.addEventListener("input", () => {
    console_.setTau(Number(tauSlider.value));
    debouncedQuery();
  });
  topKInput.addEventListener("input", () => {
    const v = topKInput.value.trim();
    console_.setTopK(v === "" ? null : Math.max(1, Number(v) | 0));
  });
  goButton.addEventListener("click", () => void console_.runQuery());

  void client
    .health()
    .then((h) => {
      healthBox.textContent = h.index
        ? `index: ${h.index.sequences} sequences, ${h.index.vectors} vectors, d=${h.index.dimension}`
        : "no snapshot loaded";
    })
    .catch(() => {
      healthBox.textContent = "service unreachable";
    });
  void client
    .vocabulary()
    .then((terms) => {
      termInput.placeholder = terms.length ? `e.g. ${terms.join(", ")}` : "query term";
    })
    .catch(() => undefined);
  void console_.refreshEvalReport();

  return console_;
}

declare global {
  interface Window {
    OODR_SERVICE_URL?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("gallery")) {
  start(window.OODR_SERVICE_URL ?? "http://127.0.0.1:8787");
}
