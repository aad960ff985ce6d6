/** The four views: Canvas, Prompt Recommend, Sketch Refine, Result.
 *
 * Views render straight from the store and call the typed API client; every
 * mutation round-trips through the server and re-renders from its response.
 * The exported controllers are the same functions the DOM handlers call,
 * which keeps scripted runs and pointer-driven runs on one code path.
 */

import { ApiError } from "./api.js";
import type { LegendEntryDoc, ObjectDoc, SpaceDoc } from "./api.js";
import { encodePng, toBase64 } from "./png.js";
import { rasterize, usedColorIndices } from "./raster.js";
import type { Point } from "./raster.js";
import type { AppStore } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const b = el("button", "btn", label);
  b.addEventListener("click", onClick);
  return b;
}

// -- canvas view --------------------------------------------------------------

export class CanvasController {
  readonly root: HTMLElement;
  private surface: HTMLCanvasElement;
  private legendBox: HTMLElement;
  private drawing = false;

  constructor(readonly store: AppStore) {
    this.root = el("section", "view view-canvas");
    const tools = el("div", "toolbar");

    store.palette.colors.forEach((color) => {
      const swatch = button(color.name, () => this.setColor(color.z));
      swatch.style.background = color.hex;
      swatch.classList.add("swatch");
      tools.appendChild(swatch);
    });
    tools.appendChild(button("eraser", () => this.setEraser()));

    const width = el("input") as HTMLInputElement;
    width.type = "range";
    width.min = "4";
    width.max = "120";
    width.value = String(store.canvas.strokeWidth);
    width.addEventListener("input", () => this.setWidth(Number(width.value)));
    tools.appendChild(width);

    tools.appendChild(button("undo", () => this.undo()));
    tools.appendChild(button("clear", () => this.clearAll()));
    tools.appendChild(button("upload sketch", () => void this.upload()));
    this.root.appendChild(tools);

    this.surface = el("canvas", "sketch-surface");
    this.surface.width = store.config.canvas_size;
    this.surface.height = store.config.canvas_size;
    this.surface.addEventListener("pointerdown", (e) => {
      this.drawing = true;
      store.canvas.beginStroke(this.surfacePoint(e));
      this.repaint();
    });
    this.surface.addEventListener("pointermove", (e) => {
      if (!this.drawing) return;
      store.canvas.extendStroke(this.surfacePoint(e));
      this.repaint();
    });
    const stop = () => {
      this.drawing = false;
    };
    this.surface.addEventListener("pointerup", stop);
    this.surface.addEventListener("pointerleave", stop);
    this.root.appendChild(this.surface);

    this.legendBox = el("div", "legend-editor");
    this.root.appendChild(this.legendBox);
    this.renderLegend();
  }

  private surfacePoint(e: PointerEvent): Point {
    const box = this.surface.getBoundingClientRect();
    const scaleX = box.width ? this.surface.width / box.width : 1;
    const scaleY = box.height ? this.surface.height / box.height : 1;
    return { x: (e.clientX - box.left) * scaleX, y: (e.clientY - box.top) * scaleY };
  }

  setColor(index: number): void {
    this.store.canvas.tool = { kind: "brush", colorIndex: index };
  }

  setEraser(): void {
    this.store.canvas.tool = { kind: "eraser" };
  }

  setWidth(width: number): void {
    this.store.canvas.strokeWidth = width;
  }

  addStroke(colorIndex: number | null, width: number, points: Point[]): void {
    this.store.canvas.addStroke(colorIndex, width, points);
    this.repaint();
  }

  undo(): void {
    this.store.canvas.undo();
    this.repaint();
  }

  clearAll(): void {
    this.store.canvas.clear();
    this.repaint();
  }

  setLegend(hex: string, regionId: string, type: string): void {
    this.store.legend[hex] = type ? { region_id: regionId, type } : { region_id: regionId };
  }

  /** Re-derive the raster from strokes and paint the preview (when a 2D
   * context exists; headless DOMs skip the preview but keep the state). */
  repaint(): void {
    this.renderLegend();
    const ctx = this.surface.getContext("2d");
    if (!ctx) return;
    const size = this.store.config.canvas_size;
    const rgb = rasterize(this.store.canvas, this.store.paletteHexes());
    const image = ctx.createImageData(size, size);
    for (let i = 0, j = 0; i < rgb.length; i += 3, j += 4) {
      image.data[j] = rgb[i]!;
      image.data[j + 1] = rgb[i + 1]!;
      image.data[j + 2] = rgb[i + 2]!;
      image.data[j + 3] = 255;
    }
    ctx.putImageData(image, 0, 0);
  }

  private renderLegend(): void {
    this.legendBox.textContent = "";
    const hexes = this.store.paletteHexes();
    for (const idx of usedColorIndices(this.store.canvas, hexes)) {
      const hex = hexes[idx]!;
      const entry = this.store.legend[hex] ?? { region_id: "", type: "" };
      const row = el("div", "legend-row");
      const dot = el("span", "legend-dot");
      dot.style.background = hex;
      row.appendChild(dot);
      const rid = el("input") as HTMLInputElement;
      rid.placeholder = "region id";
      rid.value = entry.region_id;
      const type = el("input") as HTMLInputElement;
      type.placeholder = "object type";
      type.value = entry.type ?? "";
      const sync = () => this.setLegend(hex, rid.value, type.value);
      rid.addEventListener("change", sync);
      type.addEventListener("change", sync);
      row.appendChild(rid);
      row.appendChild(type);
      this.legendBox.appendChild(row);
    }
  }

  exportSketch(): { pngB64: string; legend: Record<string, LegendEntryDoc> } {
    const rgb = rasterize(this.store.canvas, this.store.paletteHexes());
    const png = encodePng(this.store.config.canvas_size, this.store.config.canvas_size, rgb);
    const legend: Record<string, LegendEntryDoc> = {};
    const hexes = this.store.paletteHexes();
    for (const idx of usedColorIndices(this.store.canvas, hexes)) {
      const hex = hexes[idx]!;
      const entry = this.store.legend[hex];
      if (entry && entry.region_id) legend[hex] = entry;
    }
    return { pngB64: toBase64(png), legend };
  }

  async upload(): Promise<void> {
    const { pngB64, legend } = this.exportSketch();
    try {
      const resp = await this.store.api.putSketch(this.store.sessionId, pngB64, legend);
      this.store.regions = resp.regions;
      this.store.setToast(`sketch uploaded: ${resp.regions.length} region(s)`);
    } catch (err) {
      this.store.setToast(err instanceof ApiError ? err.detail : String(err));
      throw err;
    }
  }
}

// -- prompt view --------------------------------------------------------------

const OBJECT_FIELDS = ["type", "attribute", "state"] as const;
type ObjectField = (typeof OBJECT_FIELDS)[number];

export class PromptController {
  readonly root: HTMLElement;
  private form: HTMLElement;

  constructor(readonly store: AppStore) {
    this.root = el("section", "view view-prompt");
    const bar = el("div", "toolbar");
    bar.appendChild(button("Inference", () => void this.runInference()));
    bar.appendChild(button("Save edits", () => void this.save()));
    this.root.appendChild(bar);
    this.form = el("div", "space-form");
    this.root.appendChild(this.form);
    store.subscribe(() => this.render());
    this.render();
  }

  async runInference(): Promise<void> {
    try {
      const resp = await this.store.api.infer(this.store.sessionId);
      this.store.space = resp.space;
      this.store.violations = resp.violations;
      this.store.notify();
    } catch (err) {
      this.store.setToast(err instanceof ApiError ? err.detail : String(err));
      throw err;
    }
  }

  setObjectField(region: string, field: ObjectField, value: string): void {
    const space = this.store.space;
    if (!space) return;
    for (const obj of space.objects) {
      if (obj.region !== region) continue;
      if (field === "type") obj.type = value;
      else obj[field] = splitPhrases(value);
    }
  }

  setOverall(field: "lighting" | "camera" | "style", value: string): void {
    if (this.store.space) this.store.space.overall[field] = value;
  }

  /** PUT the edited space; the server either accepts it or returns the
   * violations we render inline. */
  async save(): Promise<void> {
    const space = this.store.space;
    if (!space) return;
    try {
      await this.store.api.putSpace(this.store.sessionId, space);
      this.store.violations = [];
      this.store.setToast("prompt saved");
    } catch (err) {
      if (err instanceof ApiError) {
        this.store.violations = err.violations;
        this.store.setToast(err.detail);
      }
      throw err;
    }
  }

  private render(): void {
    this.form.textContent = "";
    const space = this.store.space;
    if (!space) {
      this.form.appendChild(el("p", "hint", "Run Inference to fill the semantic space."));
      return;
    }
    for (const obj of space.objects) {
      this.form.appendChild(this.objectRow(obj));
    }
    this.form.appendChild(this.overallRow(space));
    const general = this.store.violations.filter((v) => !v.region_id);
    for (const v of general) {
      this.form.appendChild(el("p", "violation", v.message));
    }
  }

  private objectRow(obj: ObjectDoc): HTMLElement {
    const row = el("fieldset", "object-row");
    row.appendChild(el("legend", "", obj.region));
    for (const field of OBJECT_FIELDS) {
      const label = el("label", "", field);
      const input = el("input") as HTMLInputElement;
      input.value = field === "type" ? obj.type : obj[field].join(", ");
      input.addEventListener("change", () => this.setObjectField(obj.region, field, input.value));
      label.appendChild(input);
      row.appendChild(label);
      for (const v of this.store.violations) {
        if (v.region_id === obj.region && v.field === field) {
          row.appendChild(el("p", "violation", v.message));
        }
      }
    }
    return row;
  }

  private overallRow(space: SpaceDoc): HTMLElement {
    const row = el("fieldset", "overall-row");
    row.appendChild(el("legend", "", "overall"));
    (["lighting", "camera", "style"] as const).forEach((field) => {
      const label = el("label", "", field);
      const input = el("input") as HTMLInputElement;
      input.value = space.overall[field];
      input.addEventListener("change", () => this.setOverall(field, input.value));
      label.appendChild(input);
      row.appendChild(label);
    });
    return row;
  }
}

function splitPhrases(value: string): string[] {
  return value
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
}

// -- refine view --------------------------------------------------------------

export class RefineController {
  readonly root: HTMLElement;
  private gallery: HTMLElement;
  private placementsBox: HTMLElement;
  activeRegion = "";

  constructor(readonly store: AppStore) {
    this.root = el("section", "view view-refine");
    const bar = el("div", "toolbar");
    const picker = el("select") as HTMLSelectElement;
    picker.addEventListener("change", () => {
      this.activeRegion = picker.value;
    });
    bar.appendChild(picker);
    bar.appendChild(button("regenerate", () => void this.loadCandidates(this.activeRegion)));
    this.root.appendChild(bar);
    this.gallery = el("div", "gallery");
    this.root.appendChild(this.gallery);
    this.placementsBox = el("div", "placements");
    this.root.appendChild(this.placementsBox);

    store.subscribe(() => {
      picker.textContent = "";
      for (const region of store.regions) {
        const opt = el("option", "", region.region_id) as HTMLOptionElement;
        opt.value = region.region_id;
        picker.appendChild(opt);
      }
      if (!this.activeRegion && store.regions.length) {
        this.activeRegion = store.regions[0]!.region_id;
      }
      this.renderPlacements();
    });
  }

  /** One decompose round: fetch the server-ranked candidate gallery. */
  async loadCandidates(regionId: string): Promise<void> {
    try {
      const listing = await this.store.api.makeCandidates(this.store.sessionId, regionId);
      this.store.rounds[regionId] = listing;
      this.renderGallery(regionId);
      this.store.notify();
    } catch (err) {
      this.store.setToast(err instanceof ApiError ? err.detail : String(err));
      throw err;
    }
  }

  async select(regionId: string, index: number): Promise<void> {
    const round = this.store.rounds[regionId];
    if (!round) throw new Error(`no candidate round for ${regionId}`);
    try {
      const placement = await this.store.api.selectCandidate(
        this.store.sessionId,
        regionId,
        index,
        round.version,
      );
      this.store.placements[regionId] = placement;
      this.store.notify();
    } catch (err) {
      this.store.setToast(err instanceof ApiError ? err.detail : String(err));
      throw err;
    }
  }

  /** Translate the placed object; the server composes the delta and echoes
   * the accumulated transform, which becomes the new local state. */
  async dragBy(regionId: string, dx: number, dy: number): Promise<void> {
    const before = this.store.placements[regionId];
    try {
      const placement = await this.store.api.patchPlacement(this.store.sessionId, regionId, {
        dx,
        dy,
      });
      this.store.placements[regionId] = placement;
      this.store.notify();
    } catch (err) {
      if (before) this.store.placements[regionId] = before; // revert optimistic move
      this.store.setToast(err instanceof ApiError ? err.detail : String(err));
      throw err;
    }
  }

  async resizeBy(regionId: string, scale: number): Promise<void> {
    const before = this.store.placements[regionId];
    try {
      const placement = await this.store.api.patchPlacement(this.store.sessionId, regionId, {
        scale,
      });
      this.store.placements[regionId] = placement;
      this.store.notify();
    } catch (err) {
      if (before) this.store.placements[regionId] = before;
      this.store.setToast(err instanceof ApiError ? err.detail : String(err));
      throw err;
    }
  }

  private renderGallery(regionId: string): void {
    this.gallery.textContent = "";
    const round = this.store.rounds[regionId];
    if (!round) return;
    round.candidates.forEach((candidate) => {
      const card = el("figure", "candidate-card");
      const img = el("img") as HTMLImageElement;
      img.src = `data:image/png;base64,${candidate.image_png_b64}`;
      img.alt = `${regionId} candidate ${candidate.index}`;
      card.appendChild(img);
      const caption = el(
        "figcaption",
        candidate.flagged ? "scores flagged" : "scores",
        `iou ${candidate.iou.toFixed(3)} | score ${candidate.combined.toFixed(3)}`,
      );
      card.appendChild(caption);
      card.appendChild(button("select", () => void this.select(regionId, candidate.index)));
      this.gallery.appendChild(card);
    });
  }

  private renderPlacements(): void {
    this.placementsBox.textContent = "";
    for (const [rid, p] of Object.entries(this.store.placements)) {
      const row = el("div", "placement-row");
      row.appendChild(
        el(
          "span",
          p.clipped ? "placement clipped" : "placement",
          `${rid}: dx ${p.dx.toFixed(1)} dy ${p.dy.toFixed(1)} scale ${p.scale.toFixed(2)}` +
            (p.clipped ? " (clipped)" : ""),
        ),
      );
      this.attachDragHandle(row, rid);
      row.appendChild(button("bigger", () => void this.resizeBy(rid, 1.25)));
      row.appendChild(button("smaller", () => void this.resizeBy(rid, 0.8)));
      this.placementsBox.appendChild(row);
    }
  }

  private attachDragHandle(row: HTMLElement, regionId: string): void {
    const handle = el("span", "drag-handle", "drag");
    let startX = 0;
    let startY = 0;
    let active = false;
    handle.addEventListener("pointerdown", (e) => {
      active = true;
      startX = e.clientX;
      startY = e.clientY;
    });
    handle.addEventListener("pointerup", (e) => {
      if (!active) return;
      active = false;
      const dx = e.clientX - startX;
      const dy = e.clientY - startY;
      if (dx || dy) void this.dragBy(regionId, dx, dy);
    });
    row.appendChild(handle);
  }
}

// -- result view --------------------------------------------------------------

export class ResultController {
  readonly root: HTMLElement;
  private board: HTMLElement;
  private samplesInput: HTMLInputElement;

  constructor(readonly store: AppStore) {
    this.root = el("section", "view view-result");
    const bar = el("div", "toolbar");
    this.samplesInput = el("input") as HTMLInputElement;
    this.samplesInput.type = "number";
    this.samplesInput.min = "1";
    this.samplesInput.max = "16";
    this.samplesInput.value = "1";
    bar.appendChild(this.samplesInput);
    bar.appendChild(button("Generate", () => void this.generate(Number(this.samplesInput.value))));
    this.root.appendChild(bar);
    this.board = el("div", "results");
    this.root.appendChild(this.board);
  }

  async generate(samples: number): Promise<void> {
    try {
      const resp = await this.store.api.generate(this.store.sessionId, samples);
      this.store.results = resp.results;
      this.render();
      this.store.notify();
    } catch (err) {
      this.store.setToast(err instanceof ApiError ? err.detail : String(err));
      throw err;
    }
  }

  render(): void {
    this.board.textContent = "";
    for (const result of this.store.results) {
      const card = el("figure", "result-card");
      if (result.image_png_b64) {
        const img = el("img") as HTMLImageElement;
        img.src = `data:image/png;base64,${result.image_png_b64}`;
        img.alt = `sample ${result.index}`;
        card.appendChild(img);
        const save = el("a", "save-link", "save") as HTMLAnchorElement;
        save.href = img.src;
        save.download = `result_${result.index}.png`;
        card.appendChild(save);
      } else {
        card.appendChild(el("p", "violation", result.error ?? "sample failed"));
      }
      this.board.appendChild(card);
    }
  }
}

// -- shell ---------------------------------------------------------------------

export interface App {
  store: AppStore;
  canvas: CanvasController;
  prompt: PromptController;
  refine: RefineController;
  result: ResultController;
  show(view: "canvas" | "prompt" | "refine" | "result"): void;
}

export function mountApp(root: HTMLElement, store: AppStore): App {
  root.textContent = "";
  const tabs = el("nav", "tabs");
  const toast = el("p", "toast");
  const body = el("main", "view-host");
  root.appendChild(tabs);
  root.appendChild(toast);
  root.appendChild(body);

  const canvas = new CanvasController(store);
  const prompt = new PromptController(store);
  const refine = new RefineController(store);
  const result = new ResultController(store);
  const views = { canvas, prompt, refine, result } as const;

  const show = (name: keyof typeof views) => {
    body.textContent = "";
    body.appendChild(views[name].root);
  };
  (Object.keys(views) as (keyof typeof views)[]).forEach((name) => {
    tabs.appendChild(button(name, () => show(name)));
  });
  store.subscribe(() => {
    toast.textContent = store.toast;
  });
  show("canvas");

  return { store, canvas, prompt, refine, result, show };
}
