/** Typed client for the session HTTP API. All state lives on the server. */

export interface FaceTile {
  index: number;
  svg: string;
}

export interface AuxResponse {
  iteration: number;
  faces: FaceTile[];
}

export interface SliderMeta {
  name: string;
  min: number;
  max: number;
  current: number;
}

export interface RankingResponse {
  iteration: number;
  stopped: boolean;
  reconstruction_svg: string;
  sliders?: SliderMeta[];
}

export interface SliderResponse {
  reconstruction_svg: string;
  features: Record<string, number>;
}

export interface FinalizeResponse {
  session_id: string;
  final_latent: number[];
  svg: string;
  n_events: number;
}

export interface SessionState {
  session_id: string;
  stage: string;
  iteration: number;
  category: string;
  reconstruction_svg?: string;
  final_latent?: number[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, "network", String(err));
  }
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, body.code ?? "unknown", body.message ?? resp.statusText);
  }
  return body as T;
}

export class ApiClient {
  constructor(private base: string = "") {}

  createSession(category: string, mode = "interactive"): Promise<{ session_id: string; stage: string }> {
    return request(`${this.base}/api/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ category, mode }),
    });
  }

  getState(sid: string): Promise<SessionState> {
    return request(`${this.base}/api/sessions/${sid}`);
  }

  getAux(sid: string): Promise<AuxResponse> {
    return request(`${this.base}/api/sessions/${sid}/aux`);
  }

  submitRanking(sid: string, order: number[]): Promise<RankingResponse> {
    return request(`${this.base}/api/sessions/${sid}/ranking`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ order }),
    });
  }

  setSlider(sid: string, feature: string, value: number): Promise<SliderResponse> {
    return request(`${this.base}/api/sessions/${sid}/slider`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ feature, value }),
    });
  }

  finalize(sid: string): Promise<FinalizeResponse> {
    return request(`${this.base}/api/sessions/${sid}/finalize`, { method: "POST" });
  }

  features(): Promise<SliderMeta[]> {
    return request(`${this.base}/api/features`);
  }
}
