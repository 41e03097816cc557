/** Payload shapes of the inference service HTTP API. */

export interface GridInfo {
  H: number;
  W: number;
  pitch_mm: number;
}

export interface FieldsInfo {
  fields: string[];
  loaded: string[];
  parameter_ranges: Record<string, [number, number]>;
  grid: GridInfo;
}

export interface MaterialInfo {
  id: number;
  cluster: number;
  /** [strain, stress_MPa] polyline subsampled by the server. */
  preview: [number, number][];
}

export interface MaterialsCatalog {
  family: string;
  count: number;
  materials: MaterialInfo[];
}

export interface PredictSummary {
  representative_max: number;
  min: number;
  max: number;
  inference_ms: number;
}

export interface PredictResponse {
  field: string;
  shape: [number, number];
  format: string;
  grid_b64?: string;
  png_b64?: string;
  mask_b64: string;
  summary: PredictSummary;
  model_version: string;
}

export interface PredictOptions {
  return_format?: string;
  denoise?: boolean;
}

export interface PredictRequest {
  geometry: Record<string, number>;
  material_id?: number;
  curve?: [number, number][];
  field: string;
  options?: PredictOptions;
}

export interface ErrorBody {
  errors: Record<string, string>;
}
