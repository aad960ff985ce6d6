/** Typed client for the regiongen HTTP service. Every call maps 1:1 onto a
 * server endpoint; the UI never computes scores or validation itself. */

export interface PaletteColor {
  hex: string;
  name: string;
  z: number;
}

export interface PaletteDoc {
  background: string;
  colors: PaletteColor[];
}

export interface EngineConfigDoc {
  canvas_size: number;
  candidate_top_k: number;
  [key: string]: unknown;
}

export interface RegionInfo {
  region_id: string;
  color: string;
  name: string;
  z: number;
  area: number;
  object_type: string | null;
}

export interface ObjectDoc {
  region: string;
  type: string;
  attribute: string[];
  state: string[];
}

export interface RelationDoc {
  subject: string;
  object: string;
  direction: string;
  relationship: string;
}

export interface SpaceDoc {
  objects: ObjectDoc[];
  relations: RelationDoc[];
  overall: { lighting: string; camera: string; style: string };
}

export interface Violation {
  region_id: string;
  field: string;
  message: string;
}

export interface CandidateDoc {
  index: number;
  iou: number;
  clip_score: number;
  combined: number;
  flagged: boolean;
  image_png_b64: string;
}

export interface CandidateList {
  version: number;
  candidates: CandidateDoc[];
}

export interface PlacementDoc {
  region_id: string;
  version: number;
  dx: number;
  dy: number;
  scale: number;
  z: number;
  clipped: boolean;
}

export interface ResultDoc {
  index: number;
  seed: number;
  image_png_b64: string | null;
  error: string | null;
}

export interface SessionDoc {
  session_id: string;
  seed: number;
  has_sketch: boolean;
  regions: RegionInfo[];
  space: SpaceDoc | null;
  rounds: Record<string, { version: number; count: number }>;
  placements: Record<string, PlacementDoc>;
  result_count: number;
}

export interface LegendEntryDoc {
  region_id: string;
  type?: string;
}

/** Server-side rejection carrying the HTTP status and any field violations. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly violations: Violation[] = [],
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  let violations: Violation[] = [];
  try {
    const body = (await resp.json()) as {
      detail?: unknown;
      violations?: Violation[];
    };
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail !== undefined) detail = JSON.stringify(body.detail);
    if (Array.isArray(body.violations)) violations = body.violations;
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiError(resp.status, detail, violations);
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  getConfig(): Promise<EngineConfigDoc> {
    return this.call("GET", "/config");
  }

  getPalette(): Promise<PaletteDoc> {
    return this.call("GET", "/palette");
  }

  createSession(seed?: number): Promise<{ session_id: string; seed: number }> {
    return this.call("POST", "/sessions", seed === undefined ? {} : { seed });
  }

  getSession(sid: string): Promise<SessionDoc> {
    return this.call("GET", `/sessions/${sid}`);
  }

  putSketch(
    sid: string,
    pngB64: string,
    legend: Record<string, LegendEntryDoc>,
  ): Promise<{ regions: RegionInfo[] }> {
    return this.call("PUT", `/sessions/${sid}/sketch`, { png_b64: pngB64, legend });
  }

  infer(sid: string): Promise<{ space: SpaceDoc; violations: Violation[] }> {
    return this.call("POST", `/sessions/${sid}/infer`);
  }

  putSpace(sid: string, space: SpaceDoc): Promise<{ violations: Violation[] }> {
    return this.call("PUT", `/sessions/${sid}/space`, { space });
  }

  makeCandidates(sid: string, regionId: string): Promise<CandidateList> {
    return this.call("POST", `/sessions/${sid}/regions/${regionId}/candidates`);
  }

  selectCandidate(
    sid: string,
    regionId: string,
    index: number,
    version: number,
  ): Promise<PlacementDoc> {
    return this.call(
      "POST",
      `/sessions/${sid}/regions/${regionId}/candidates/${index}/select`,
      { version },
    );
  }

  patchPlacement(
    sid: string,
    regionId: string,
    delta: { dx?: number; dy?: number; scale?: number },
  ): Promise<PlacementDoc> {
    return this.call("PATCH", `/sessions/${sid}/regions/${regionId}/placement`, {
      dx: delta.dx ?? 0,
      dy: delta.dy ?? 0,
      scale: delta.scale ?? 1,
    });
  }

  generate(sid: string, samples: number, seed?: number): Promise<{ results: ResultDoc[] }> {
    const body: { samples: number; seed?: number } = { samples };
    if (seed !== undefined) body.seed = seed;
    return this.call("POST", `/sessions/${sid}/generate`, body);
  }

  getResults(sid: string): Promise<{ results: ResultDoc[] }> {
    return this.call("GET", `/sessions/${sid}/results`);
  }
}
