// JSON shapes returned by the inference API, verbatim.

export type Label = "REAL" | "FAKE";

export interface FaceBox {
  x: number;
  y: number;
  w: number;
  h: number;
  confidence: number;
  applied_scale: number;
}

export interface FaceVerdict {
  frame_index: number;
  box: FaceBox;
  probability_fake: number;
  label: Label;
}

export interface Aggregate {
  probability_fake: number | null;
  label: Label | "no_face_detected";
  threshold: number;
}

export interface PredictionReport {
  media_type: "image" | "video";
  frames_analyzed: number;
  faces: FaceVerdict[];
  aggregate: Aggregate;
  model_id: string;
}

export interface HealthStatus {
  status: string;
  model_id: string | null;
  backend_name: string;
}

export interface PredictParams {
  frames?: number;
  threshold?: number;
  seed?: number | null;
}
