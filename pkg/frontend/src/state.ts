// Pure view-model: re-labeling at the current threshold happens here, from
// the stored probabilities, without touching the report object.

import type { FaceVerdict, Label, PredictionReport } from "./types";

export function labelFor(probabilityFake: number, threshold: number): Label {
  return probabilityFake >= threshold ? "FAKE" : "REAL";
}

export interface FaceView {
  frameIndex: number;
  box: { x: number; y: number; w: number; h: number };
  confidence: number;
  probabilityFake: number;
  label: Label;
}

export interface FrameView {
  frameIndex: number;
  faces: FaceView[];
}

export interface ReportView {
  mediaType: "image" | "video";
  framesAnalyzed: number;
  modelId: string;
  threshold: number;
  aggregateProbability: number | null;
  aggregateLabel: Label | "no_face_detected";
  faces: FaceView[];
  frames: FrameView[];
}

function faceView(face: FaceVerdict, threshold: number): FaceView {
  return {
    frameIndex: face.frame_index,
    box: { x: face.box.x, y: face.box.y, w: face.box.w, h: face.box.h },
    confidence: face.box.confidence,
    probabilityFake: face.probability_fake,
    label: labelFor(face.probability_fake, threshold),
  };
}

export function buildView(report: PredictionReport, threshold: number): ReportView {
  const faces = report.faces.map((face) => faceView(face, threshold));
  const byFrame = new Map<number, FaceView[]>();
  for (const face of faces) {
    const bucket = byFrame.get(face.frameIndex);
    if (bucket) bucket.push(face);
    else byFrame.set(face.frameIndex, [face]);
  }
  const frames = [...byFrame.entries()]
    .sort(([a], [b]) => a - b)
    .map(([frameIndex, frameFaces]) => ({ frameIndex, faces: frameFaces }));

  const aggregateProbability = report.aggregate.probability_fake;
  const aggregateLabel: ReportView["aggregateLabel"] =
    aggregateProbability === null
      ? "no_face_detected"
      : labelFor(aggregateProbability, threshold);

  return {
    mediaType: report.media_type,
    framesAnalyzed: report.frames_analyzed,
    modelId: report.model_id,
    threshold,
    aggregateProbability,
    aggregateLabel,
    faces,
    frames,
  };
}

export function formatPercent(probability: number): string {
  return `${Math.round(probability * 100)}%`;
}
