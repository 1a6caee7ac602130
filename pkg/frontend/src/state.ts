/** Console state machine: issues queries, suppresses stale responses,
 * tracks the selected sequence, and preserves the gallery when navigating
 * back from the detail view.
 *
 * Stale suppression contract: if query B is issued before query A's
 * response arrives, A's response is discarded — the displayed results
 * always belong to the most recently issued query that completed. */

import { ApiError, Client, ErrorPayload, EvalReport, QueryRow, SequenceRecord } from "./api.js";

export type QueryMode = "term" | "vector";

export interface Selected {
  record: SequenceRecord;
  /** per-crop similarity trace, straight from the query response */
  similarities: number[];
  bestIndex: number;
  /** gallery card score this detail view was opened from */
  score: number;
}

export interface ConsoleState {
  mode: QueryMode;
  term: string;
  vectorText: string;
  tau: number;
  topK: number | null;
  results: QueryRow[] | null;
  lastError: ErrorPayload | null;
  selected: Selected | null;
  evalReport: EvalReport | null;
  busy: boolean;
  /** scroll offset of the gallery, restored on back() */
  savedScroll: number;
}

export class Console {
  state: ConsoleState = {
    mode: "term",
    term: "",
    vectorText: "",
    tau: 0.25,
    topK: null,
    results: null,
    lastError: null,
    selected: null,
    evalReport: null,
    busy: false,
    savedScroll: 0,
  };

  private issued = 0;

  constructor(
    private readonly client: Client,
    private readonly onChange: (state: ConsoleState) => void = () => {},
  ) {}

  private emit() {
    this.onChange(this.state);
  }

  setMode(mode: QueryMode) {
    this.state.mode = mode;
    this.emit();
  }

  setTerm(term: string) {
    this.state.term = term;
  }

  setVectorText(text: string) {
    this.state.vectorText = text;
  }

  setTau(tau: number) {
    this.state.tau = tau;
    this.emit();
  }

  setTopK(topK: number | null) {
    this.state.topK = topK;
  }

  private buildRequest() {
    const req: { term?: string; embedding?: number[]; tau: number; top_k?: number } = {
      tau: this.state.tau,
    };
    if (this.state.mode === "term") {
      req.term = this.state.term.trim();
    } else {
      const parsed = JSON.parse(this.state.vectorText) as unknown;
      if (!Array.isArray(parsed) || parsed.some((x) => typeof x !== "number")) {
        throw new ApiError(0, {
          type: "bad_vector",
          message: "the raw vector must be a JSON array of numbers",
        });
      }
      req.embedding = parsed as number[];
    }
    if (this.state.topK !== null) req.top_k = this.state.topK;
    return req;
  }

  /** Issue the current query. Returns true when this response was applied,
   * false when a newer query superseded it. */
  async runQuery(): Promise<boolean> {
    const ticket = ++this.issued;
    this.state.busy = true;
    this.emit();
    let rows: QueryRow[] | null = null;
    let error: ErrorPayload | null = null;
    try {
      const response = await this.client.query(this.buildRequest());
      rows = response.results;
    } catch (err) {
      if (err instanceof ApiError) error = err.payload;
      else error = { type: "network", message: String(err) };
    }
    if (ticket !== this.issued) return false; // a newer query was issued: discard
    this.state.busy = false;
    this.state.lastError = error;
    if (error === null) {
      this.state.results = rows;
      this.state.selected = null;
    }
    this.emit();
    return true;
  }

  /** Open the crop-strip view for one gallery card. The similarity trace
   * and score come from the card's query row, the crop list from the
   * sequence endpoint. */
  async inspect(sequenceId: string, galleryScroll = 0): Promise<void> {
    const row = this.state.results?.find((r) => r.sequence_id === sequenceId);
    if (!row) return;
    this.state.savedScroll = galleryScroll;
    try {
      const record = await this.client.sequence(sequenceId);
      this.state.selected = {
        record,
        similarities: row.crop_similarities,
        bestIndex: row.best_crop.index,
        score: row.score,
      };
      this.state.lastError = null;
    } catch (err) {
      this.state.selected = null;
      this.state.lastError =
        err instanceof ApiError ? err.payload : { type: "network", message: String(err) };
    }
    this.emit();
  }

  /** Leave the detail view; the previous gallery (term, tau, results,
   * scroll position) is untouched. */
  back(): number {
    this.state.selected = null;
    this.emit();
    return this.state.savedScroll;
  }

  async refreshEvalReport(): Promise<void> {
    try {
      this.state.evalReport = await this.client.evalReport();
    } catch {
      this.state.evalReport = null;
    }
    this.emit();
  }
}
