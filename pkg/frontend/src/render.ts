/** DOM rendering. Every number shown is lifted verbatim from a service
 * response field; raw values additionally land in data- attributes so the
 * thin-client contract is mechanically checkable. */

import { EvalReport, QueryRow } from "./api.js";
import { Selected } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface GalleryHooks {
  cropUrl: (sequenceId: string, position: number) => string;
  onSelect: (sequenceId: string) => void;
}

export function renderGallery(
  container: HTMLElement,
  rows: QueryRow[],
  hooks: GalleryHooks,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  if (rows.length === 0) {
    container.appendChild(el(doc, "p", "empty", "no sequences at this threshold"));
    return;
  }
  for (const row of rows) {
    const card = el(doc, "article", "card");
    card.dataset.sequenceId = row.sequence_id;
    card.dataset.score = String(row.score);
    card.dataset.rank = String(row.rank);
    card.dataset.length = String(row.length);

    const img = el(doc, "img", "thumb");
    img.src = hooks.cropUrl(row.sequence_id, row.best_crop.index);
    img.alt = `best crop of ${row.sequence_id}`;
    card.appendChild(img);

    card.appendChild(el(doc, "h3", "card-id", row.sequence_id));
    const meta = el(doc, "p", "card-meta");
    meta.appendChild(el(doc, "span", "rank", `#${row.rank}`));
    meta.appendChild(el(doc, "span", "len", `n=${row.length}`));
    meta.appendChild(el(doc, "span", "score", `s=${row.score.toFixed(4)}`));
    card.appendChild(meta);

    card.addEventListener("click", () => hooks.onSelect(row.sequence_id));
    container.appendChild(card);
  }
}

export function renderSuggestions(
  container: HTMLElement,
  message: string,
  suggestions: string[],
  onPick: (term: string) => void,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  container.appendChild(el(doc, "p", "error-message", message));
  for (const term of suggestions) {
    const chip = el(doc, "button", "chip", term);
    chip.type = "button";
    chip.dataset.term = term;
    chip.addEventListener("click", () => onPick(term));
    container.appendChild(chip);
  }
}

export interface DetailHooks {
  cropUrl: (sequenceId: string, position: number) => string;
  onBack: () => void;
}

export function renderDetail(
  container: HTMLElement,
  selected: Selected,
  hooks: DetailHooks,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  const back = el(doc, "button", "back", "back to results");
  back.type = "button";
  back.addEventListener("click", hooks.onBack);
  container.appendChild(back);

  const title = el(doc, "h2", "detail-title", selected.record.sequence_id);
  container.appendChild(title);
  const summary = el(
    doc,
    "p",
    "detail-meta",
    `n=${selected.record.length}  s=${selected.score.toFixed(4)}  (${selected.record.source_video})`,
  );
  summary.dataset.score = String(selected.score);
  container.appendChild(summary);

  const strip = el(doc, "div", "strip");
  selected.record.crops.forEach((crop, i) => {
    const cell = el(doc, "figure", i === selected.bestIndex ? "crop best" : "crop");
    cell.dataset.position = String(i);
    const sim = selected.similarities[i];
    cell.dataset.similarity = sim === undefined ? "" : String(sim);
    const img = el(doc, "img");
    img.src = hooks.cropUrl(selected.record.sequence_id, i);
    img.alt = `crop ${i} (frame ${crop.frame_index})`;
    cell.appendChild(img);
    const caption = el(
      doc,
      "figcaption",
      undefined,
      sim === undefined ? `f${crop.frame_index}` : `f${crop.frame_index} ${sim.toFixed(4)}`,
    );
    cell.appendChild(caption);
    strip.appendChild(cell);
  });
  container.appendChild(strip);
}

/** Tiny SVG overlay of the per-query retrieval PR curves from /eval. */
export function renderPrOverlay(container: HTMLElement, report: EvalReport | null): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  const curves = report?.retrieval_curves;
  if (!curves || Object.keys(curves).length === 0) {
    container.classList.add("hidden");
    return;
  }
  container.classList.remove("hidden");
  container.appendChild(el(doc, "h2", undefined, "retrieval precision-recall"));
  const ns = "http://www.w3.org/2000/svg";
  const width = 360;
  const height = 240;
  const pad = 28;
  const svg = doc.createElementNS(ns, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "pr-plot");
  const axes = doc.createElementNS(ns, "path");
  axes.setAttribute(
    "d",
    `M ${pad} ${pad} L ${pad} ${height - pad} L ${width - pad} ${height - pad}`,
  );
  axes.setAttribute("class", "axes");
  svg.appendChild(axes);
  const colors = ["#e05a50", "#5aaaf0", "#f0c85a", "#96dc78", "#c878dc"];
  Object.entries(curves).forEach(([query, curve], qi) => {
    const points = curve.recall.map((r, i) => {
      const x = pad + r * (width - 2 * pad);
      const y = height - pad - (curve.precision[i] ?? 0) * (height - 2 * pad);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    });
    const line = doc.createElementNS(ns, "polyline");
    line.setAttribute("points", points.join(" "));
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", colors[qi % colors.length] ?? "#888");
    line.setAttribute("data-query", query);
    svg.appendChild(line);
  });
  container.appendChild(svg);
  const legend = el(doc, "p", "legend");
  Object.keys(curves).forEach((query, qi) => {
    const item = el(doc, "span", "legend-item", query);
    item.style.color = colors[qi % colors.length] ?? "#888";
    legend.appendChild(item);
  });
  container.appendChild(legend);
}
