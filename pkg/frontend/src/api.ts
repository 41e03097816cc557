/** Thin typed client for the inference service. */

import type { FieldsInfo, MaterialsCatalog, PredictRequest, PredictResponse } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public payload: unknown,
  ) {
    super(`HTTP ${status}`);
  }

  /** Per-input problem messages from a validation failure, if any. */
  get problems(): Record<string, string> {
    const p = this.payload as { errors?: Record<string, string> } | null;
    return p && typeof p === "object" && p.errors ? p.errors : {};
  }
}

async function parseOrThrow<T>(resp: Response): Promise<T> {
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    body = null;
  }
  if (!resp.ok) throw new ApiError(resp.status, body);
  if (body === null) throw new ApiError(resp.status, null);
  return body as T;
}

export class ApiClient {
  constructor(private base: string = "") {}

  getFields(): Promise<FieldsInfo> {
    return fetch(`${this.base}/fields`).then((r) => parseOrThrow<FieldsInfo>(r));
  }

  getMaterials(): Promise<MaterialsCatalog> {
    return fetch(`${this.base}/materials`).then((r) => parseOrThrow<MaterialsCatalog>(r));
  }

  predict(body: PredictRequest, signal?: AbortSignal): Promise<PredictResponse> {
    return fetch(`${this.base}/predict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    }).then((r) => parseOrThrow<PredictResponse>(r));
  }
}
