/** DOM controller for the face reconstruction session. */

import {
  ApiClient,
  ApiError,
  FaceTile,
  SliderMeta,
} from "./api";
import {
  CATEGORIES,
  CATEGORY_LABELS,
  MAX_ITERATIONS,
  RankingDraft,
  SET_SIZE,
  clampSlider,
  debounce,
} from "./state";

type Stage = "pick-category" | "ranking" | "refine" | "done";

export class App {
  private api: ApiClient;
  private root: HTMLElement;
  private stage: Stage = "pick-category";

  private sessionId = "";
  private iteration = 0;
  private faces: FaceTile[] = [];
  private draft = new RankingDraft();
  private reconstructionSvg = "";
  private sliders: SliderMeta[] = [];
  private finalLatent: number[] | null = null;
  private practice = false;

  /** True while a state-changing request is outstanding; controls disable. */
  private busy = false;
  private errorMessage = "";

  private debouncedSliderSend: Map<string, (value: number) => void> = new Map();

  constructor(root: HTMLElement, api: ApiClient) {
    this.root = root;
    this.api = api;
  }

  start(): void {
    this.render();
  }

  /** True while a state-changing request is in flight. */
  get inFlight(): boolean {
    return this.busy;
  }

  // ---- server interactions -------------------------------------------------

  private async mutate<T>(fn: () => Promise<T>, apply: (result: T) => void): Promise<boolean> {
    if (this.busy) return false;
    this.busy = true;
    this.render();
    try {
      const result = await fn();
      this.errorMessage = "";
      apply(result);
      return true;
    } catch (err) {
      this.errorMessage = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      return false;
    } finally {
      this.busy = false;
      this.render();
    }
  }

  private async beginSession(category: string): Promise<void> {
    const ok = await this.mutate(
      () => this.api.createSession(category, "interactive"),
      (resp) => {
        this.sessionId = resp.session_id;
        this.stage = "ranking";
      },
    );
    if (ok) await this.loadAux();
  }

  private async loadAux(): Promise<void> {
    await this.mutate(
      () => this.api.getAux(this.sessionId),
      (resp) => {
        this.iteration = resp.iteration;
        this.faces = resp.faces;
        this.draft.reset();
      },
    );
  }

  private async submitRanking(): Promise<void> {
    if (!this.draft.isComplete()) return;
    const order = this.draft.toOrder();
    const ok = await this.mutate(
      () => this.api.submitRanking(this.sessionId, order),
      (resp) => {
        this.iteration = resp.iteration;
        this.reconstructionSvg = resp.reconstruction_svg;
        if (resp.stopped) {
          this.stage = "refine";
          this.sliders = resp.sliders ?? [];
        }
      },
    );
    // On failure the draft is preserved so the arrangement is not lost.
    if (ok && this.stage === "ranking") await this.loadAux();
  }

  private sendSlider(feature: string, value: number): void {
    let send = this.debouncedSliderSend.get(feature);
    if (!send) {
      send = debounce((v: number) => {
        void this.mutate(
          () => this.api.setSlider(this.sessionId, feature, clampSlider(v)),
          (resp) => {
            this.reconstructionSvg = resp.reconstruction_svg;
            for (const s of this.sliders) {
              if (s.name in resp.features) s.current = resp.features[s.name];
            }
          },
        );
      }, 120);
      this.debouncedSliderSend.set(feature, send);
    }
    send(value);
  }

  private async finish(): Promise<void> {
    await this.mutate(
      () => this.api.finalize(this.sessionId),
      (resp) => {
        this.reconstructionSvg = resp.svg;
        this.finalLatent = resp.final_latent;
        this.stage = "done";
      },
    );
  }

  // ---- rendering ------------------------------------------------------------

  private render(): void {
    this.root.textContent = "";
    if (this.errorMessage) {
      const banner = el("div", "error-banner");
      banner.textContent = `Something went wrong (${this.errorMessage}). Your arrangement is preserved — try again.`;
      this.root.appendChild(banner);
    }
    switch (this.stage) {
      case "pick-category":
        this.renderCategoryPicker();
        break;
      case "ranking":
        this.renderRanking();
        break;
      case "refine":
        this.renderRefine();
        break;
      case "done":
        this.renderDone();
        break;
    }
  }

  private renderCategoryPicker(): void {
    const panel = el("div", "panel");
    panel.appendChild(heading("Who are you picturing?"));
    const hint = el("p", "hint");
    hint.textContent = "Pick the broad category that best matches the face in your mind.";
    panel.appendChild(hint);

    const practiceRow = el("label", "practice-toggle");
    const practiceBox = document.createElement("input");
    practiceBox.type = "checkbox";
    practiceBox.id = "practice-mode";
    practiceBox.checked = this.practice;
    practiceBox.addEventListener("change", () => {
      this.practice = practiceBox.checked;
    });
    practiceRow.appendChild(practiceBox);
    practiceRow.appendChild(document.createTextNode(" Practice round (results are not kept)"));
    panel.appendChild(practiceRow);

    const grid = el("div", "category-grid");
    for (const cat of CATEGORIES) {
      const btn = document.createElement("button");
      btn.className = "category-btn";
      btn.dataset.category = cat;
      btn.textContent = CATEGORY_LABELS[cat];
      btn.disabled = this.busy;
      btn.addEventListener("click", () => void this.beginSession(cat));
      grid.appendChild(btn);
    }
    panel.appendChild(grid);
    this.root.appendChild(panel);
  }

  private renderRanking(): void {
    const panel = el("div", "panel");
    const progress = el("p", "progress");
    progress.id = "progress";
    progress.textContent = `Iteration ${Math.max(1, this.iteration)} of ≤ ${MAX_ITERATIONS}`;
    panel.appendChild(progress);
    panel.appendChild(heading("Arrange the faces from closest match to furthest"));

    if (this.practice) {
      const note = el("p", "hint");
      note.textContent = "Practice round — explore freely.";
      panel.appendChild(note);
    }

    // Unranked pool.
    const pool = el("div", "face-pool");
    pool.id = "face-pool";
    for (const face of this.faces) {
      if (this.draft.placed(face.index)) continue;
      pool.appendChild(this.faceTile(face));
    }
    panel.appendChild(pool);

    // Rank slots, best first.
    const slotRow = el("div", "slot-row");
    slotRow.id = "slot-row";
    for (let slot = 0; slot < SET_SIZE; slot++) {
      const cell = el("div", "rank-slot");
      cell.dataset.slot = String(slot);
      const label = el("div", "slot-label");
      label.textContent = slot === 0 ? "best" : slot === SET_SIZE - 1 ? "worst" : `#${slot + 1}`;
      cell.appendChild(label);
      const occupant = this.draft.get(slot);
      if (occupant !== null) {
        const face = this.faces.find((f) => f.index === occupant);
        if (face) cell.appendChild(this.faceTile(face));
      }
      cell.addEventListener("dragover", (ev) => ev.preventDefault());
      cell.addEventListener("drop", (ev) => {
        ev.preventDefault();
        const idx = Number(ev.dataTransfer?.getData("text/plain"));
        if (!Number.isNaN(idx)) {
          this.draft.place(idx, slot);
          this.render();
        }
      });
      slotRow.appendChild(cell);
    }
    panel.appendChild(slotRow);

    const submit = document.createElement("button");
    submit.id = "submit-ranking";
    submit.className = "primary";
    submit.textContent = "Submit ranking";
    submit.disabled = this.busy || !this.draft.isComplete();
    submit.addEventListener("click", () => void this.submitRanking());
    panel.appendChild(submit);

    if (this.reconstructionSvg) {
      panel.appendChild(this.reconstructionPanel("Current best guess"));
    }
    this.root.appendChild(panel);
  }

  private faceTile(face: FaceTile): HTMLElement {
    const tile = el("div", "face-tile");
    tile.dataset.face = String(face.index);
    tile.draggable = !this.busy;
    tile.tabIndex = 0;
    tile.innerHTML = face.svg;
    tile.addEventListener("dragstart", (ev) => {
      ev.dataTransfer?.setData("text/plain", String(face.index));
    });
    // Keyboard: digits 1-6 place the focused face into that rank slot.
    tile.addEventListener("keydown", (ev) => {
      const n = Number(ev.key);
      if (n >= 1 && n <= SET_SIZE && !this.busy) {
        this.draft.place(face.index, n - 1);
        this.render();
      }
    });
    return tile;
  }

  private reconstructionPanel(title: string): HTMLElement {
    const box = el("div", "reconstruction");
    box.id = "reconstruction";
    const h = el("h3", "");
    h.textContent = title;
    box.appendChild(h);
    const holder = el("div", "reconstruction-svg");
    holder.innerHTML = this.reconstructionSvg;
    box.appendChild(holder);
    return box;
  }

  private renderRefine(): void {
    const panel = el("div", "panel");
    panel.appendChild(heading("Fine-tune the face"));
    panel.appendChild(this.reconstructionPanel("Reconstruction"));

    const list = el("div", "slider-list");
    list.id = "slider-list";
    for (const meta of this.sliders) {
      const row = el("label", "slider-row");
      const name = el("span", "slider-name");
      name.textContent = meta.name.replace(/_/g, " ");
      row.appendChild(name);
      const input = document.createElement("input");
      input.type = "range";
      input.min = String(meta.min);
      input.max = String(meta.max);
      input.step = "0.001";
      input.value = String(meta.current);
      input.dataset.feature = meta.name;
      input.disabled = this.busy;
      input.addEventListener("input", () => {
        this.sendSlider(meta.name, Number(input.value));
      });
      row.appendChild(input);
      list.appendChild(row);
    }
    panel.appendChild(list);

    const finish = document.createElement("button");
    finish.id = "finish";
    finish.className = "primary";
    finish.textContent = "Finish";
    finish.disabled = this.busy;
    finish.addEventListener("click", () => void this.finish());
    panel.appendChild(finish);
    this.root.appendChild(panel);
  }

  private renderDone(): void {
    const panel = el("div", "panel");
    panel.appendChild(heading(this.practice ? "Practice complete" : "All done"));
    panel.appendChild(this.reconstructionPanel("Final face"));
    const info = el("p", "hint");
    info.textContent = this.practice
      ? "This was a practice round; nothing was recorded for study purposes."
      : `Session ${this.sessionId} saved (${this.finalLatent?.length ?? 0}-dimensional code).`;
    panel.appendChild(info);
    const again = document.createElement("button");
    again.id = "restart";
    again.textContent = "Start another";
    again.addEventListener("click", () => {
      this.sessionId = "";
      this.iteration = 0;
      this.faces = [];
      this.draft.reset();
      this.reconstructionSvg = "";
      this.sliders = [];
      this.finalLatent = null;
      this.stage = "pick-category";
      this.render();
    });
    panel.appendChild(again);
    this.root.appendChild(panel);
  }
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}

function heading(text: string): HTMLElement {
  const h = el("h2", "");
  h.textContent = text;
  return h;
}
