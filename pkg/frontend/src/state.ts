/** Client-side session store: last known server state plus sketch strokes.
 * Server responses are the only source of truth for scores, rankings, and
 * validation results; the store just caches them for rendering. */

import type {
  ApiClient,
  CandidateList,
  EngineConfigDoc,
  LegendEntryDoc,
  PaletteDoc,
  PlacementDoc,
  RegionInfo,
  ResultDoc,
  SpaceDoc,
  Violation,
} from "./api.js";
import { CanvasState } from "./raster.js";

export type Listener = () => void;

export class AppStore {
  sessionId = "";
  seed = 0;
  regions: RegionInfo[] = [];
  space: SpaceDoc | null = null;
  rounds: Record<string, CandidateList> = {};
  placements: Record<string, PlacementDoc> = {};
  results: ResultDoc[] = [];
  violations: Violation[] = [];
  /** per-color legend the user assigns before upload */
  legend: Record<string, LegendEntryDoc> = {};
  toast = "";

  readonly canvas: CanvasState;
  private listeners: Listener[] = [];

  constructor(
    readonly api: ApiClient,
    readonly config: EngineConfigDoc,
    readonly palette: PaletteDoc,
  ) {
    this.canvas = new CanvasState(config.canvas_size);
  }

  paletteHexes(): string[] {
    return this.palette.colors.map((c) => c.hex);
  }

  subscribe(fn: Listener): void {
    this.listeners.push(fn);
  }

  notify(): void {
    for (const fn of this.listeners) fn();
  }

  setToast(message: string): void {
    this.toast = message;
    this.notify();
  }

  applySession(doc: {
    session_id: string;
    seed: number;
    regions: RegionInfo[];
    space: SpaceDoc | null;
    placements: Record<string, PlacementDoc>;
  }): void {
    this.sessionId = doc.session_id;
    this.seed = doc.seed;
    this.regions = doc.regions;
    this.space = doc.space;
    this.placements = doc.placements;
    this.notify();
  }
}

export async function createStore(api: ApiClient, seed?: number): Promise<AppStore> {
  const [config, palette] = await Promise.all([api.getConfig(), api.getPalette()]);
  const store = new AppStore(api, config, palette);
  const created = await api.createSession(seed);
  store.sessionId = created.session_id;
  store.seed = created.seed;
  return store;
}
