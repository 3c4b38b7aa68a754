// DOM construction and the upload/inspect controller. Nothing is persisted:
// the report lives in memory and dies with the page.

import { ApiError, type ApiClient } from "./api";
import { buildView, formatPercent, type FaceView, type ReportView } from "./state";
import type { PredictionReport } from "./types";

const FRAME_FALLBACK_SIZE = 340;

export interface App {
  /** Programmatic upload path; the form submit handler calls this too. */
  analyze(file: File): Promise<void>;
  readonly pending: boolean;
  readonly report: PredictionReport | null;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function bannerText(view: ReportView): string {
  if (view.aggregateLabel === "no_face_detected") {
    return "No face found in the upload";
  }
  const pct = formatPercent(view.aggregateProbability ?? 0);
  return view.aggregateLabel === "FAKE"
    ? `Counterfeit suspected - mean fake probability ${pct}`
    : `Looks real - mean fake probability ${pct}`;
}

/** Reference frame size for overlay placement when the media pixels are not
 * available (video frames, or preview decoding unsupported). */
function frameExtent(faces: FaceView[]): { w: number; h: number } {
  let w = 0;
  let h = 0;
  for (const face of faces) {
    w = Math.max(w, face.box.x + face.box.w);
    h = Math.max(h, face.box.y + face.box.h);
  }
  if (!w || !h) return { w: FRAME_FALLBACK_SIZE, h: FRAME_FALLBACK_SIZE };
  return { w: w * 1.1, h: h * 1.1 };
}

function renderOverlay(face: FaceView, ref: { w: number; h: number }): HTMLDivElement {
  const overlay = el("div", {
    class: `face-overlay face-${face.label.toLowerCase()}`,
    "data-testid": "face-overlay",
    "data-label": face.label,
    "data-probability": String(face.probabilityFake),
  });
  overlay.style.position = "absolute";
  overlay.style.left = `${(face.box.x / ref.w) * 100}%`;
  overlay.style.top = `${(face.box.y / ref.h) * 100}%`;
  overlay.style.width = `${(face.box.w / ref.w) * 100}%`;
  overlay.style.height = `${(face.box.h / ref.h) * 100}%`;
  overlay.appendChild(
    el("span", { class: "face-chip" },
       `${face.label} ${formatPercent(face.probabilityFake)}`),
  );
  return overlay;
}

export function createApp(root: HTMLElement, client: ApiClient): App {
  let report: PredictionReport | null = null;
  let pending = false;
  let lastFile: File | null = null;
  let previewUrl: string | null = null;

  root.innerHTML = "";
  root.appendChild(el("h1", {}, "veriframe"));
  root.appendChild(
    el("p", { class: "tagline" },
       "Upload an image or video; every detected face is scored for GAN manipulation."),
  );

  const form = el("form", { "data-testid": "controls", class: "controls" });
  const fileInput = el("input", {
    type: "file",
    accept: "image/*,video/*,.zip",
    "data-testid": "file-input",
  });
  const framesInput = el("input", {
    type: "number", min: "1", max: "60", value: "10",
    "data-testid": "frames-input", title: "video frames to sample",
  });
  const seedInput = el("input", {
    type: "number", placeholder: "seed (optional)",
    "data-testid": "seed-input", title: "sampling seed for reproducible runs",
  });
  const thresholdInput = el("input", {
    type: "range", min: "0", max: "1", step: "0.01", value: "0.5",
    "data-testid": "threshold-slider",
  });
  const thresholdValue = el("span", { "data-testid": "threshold-value" }, "0.50");
  const submit = el("button", { type: "submit", "data-testid": "analyze-button" },
                    "Analyze");
  form.append(
    fileInput,
    el("label", {}, "frames"), framesInput,
    el("label", {}, "seed"), seedInput,
    el("label", {}, "threshold"), thresholdInput, thresholdValue,
    submit,
  );
  root.appendChild(form);

  const errorPanel = el("div", {
    class: "error-panel", "data-testid": "error-panel", hidden: "",
  });
  const errorMessage = el("span", { "data-testid": "error-message" });
  const retryButton = el("button", { type: "button", "data-testid": "error-retry" },
                         "Retry");
  const dismissButton = el("button", { type: "button", "data-testid": "error-dismiss" },
                           "Dismiss");
  errorPanel.append(errorMessage, retryButton, dismissButton);
  root.appendChild(errorPanel);

  const results = el("section", {
    class: "results", "data-testid": "results", hidden: "",
  });
  const banner = el("div", { class: "banner", "data-testid": "banner" });
  const meta = el("p", { class: "meta", "data-testid": "meta" });
  const strip = el("div", { class: "frames-strip", "data-testid": "frames-strip" });
  results.append(banner, meta, strip);
  root.appendChild(results);

  function currentThreshold(): number {
    return Number(thresholdInput.value);
  }

  function setPending(value: boolean): void {
    pending = value;
    for (const control of [fileInput, framesInput, seedInput, thresholdInput, submit]) {
      (control as HTMLInputElement | HTMLButtonElement).disabled = value;
    }
    submit.textContent = value ? "Analyzing..." : "Analyze";
  }

  function showError(error: unknown): void {
    const text =
      error instanceof ApiError
        ? error.status === 0
          ? "service unreachable"
          : `service error ${error.status} (${error.code})`
        : `unexpected error: ${String(error)}`;
    errorMessage.textContent = text;
    errorPanel.hidden = false;
  }

  function renderFrameTile(view: ReportView, frameIndex: number,
                           faces: FaceView[]): HTMLDivElement {
    const tile = el("div", {
      class: "frame-tile", "data-testid": "frame-tile",
      "data-frame-index": String(frameIndex),
    });
    tile.appendChild(el("div", { class: "frame-title" },
                        view.mediaType === "video" ? `frame ${frameIndex}` : "image"));
    const layer = el("div", { class: "overlay-layer", "data-testid": "overlay-layer" });
    layer.style.position = "relative";
    if (view.mediaType === "image" && previewUrl) {
      const img = el("img", { class: "frame-preview", src: previewUrl, alt: "upload" });
      layer.appendChild(img);
    }
    const ref = frameExtent(faces);
    layer.style.aspectRatio = `${ref.w} / ${ref.h}`;
    for (const face of faces) layer.appendChild(renderOverlay(face, ref));
    tile.appendChild(layer);
    return tile;
  }

  function renderResults(): void {
    if (!report) return;
    const view = buildView(report, currentThreshold());
    results.hidden = false;
    banner.textContent = bannerText(view);
    banner.className = "banner " + (
      view.aggregateLabel === "no_face_detected"
        ? "verdict-neutral"
        : view.aggregateLabel === "FAKE"
          ? "verdict-fake"
          : "verdict-real"
    );
    banner.setAttribute("data-verdict", view.aggregateLabel);
    meta.textContent =
      `${view.mediaType} | ${view.framesAnalyzed} frame(s) analyzed | ` +
      `${view.faces.length} face(s) | model ${view.modelId || "?"}`;
    strip.innerHTML = "";
    if (view.frames.length === 0) {
      strip.appendChild(el("p", { class: "empty-note" },
                           "Nothing to inspect: no faces were detected."));
      return;
    }
    for (const frame of view.frames) {
      strip.appendChild(renderFrameTile(view, frame.frameIndex, frame.faces));
    }
  }

  function setPreview(file: File): void {
    if (previewUrl) {
      URL.revokeObjectURL(previewUrl);
      previewUrl = null;
    }
    if (typeof URL.createObjectURL === "function" && file.type.startsWith("image/")) {
      previewUrl = URL.createObjectURL(file);
    }
  }

  async function analyze(file: File): Promise<void> {
    if (pending) return;
    lastFile = file;
    errorPanel.hidden = true;
    setPending(true);
    try {
      setPreview(file);
      const params = {
        frames: Number(framesInput.value) || 10,
        threshold: currentThreshold(),
        seed: seedInput.value === "" ? null : Number(seedInput.value),
      };
      report = await client.predict(file, params);
      renderResults();
    } catch (error) {
      report = null;
      results.hidden = true;
      showError(error);
    } finally {
      setPending(false);
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const file = fileInput.files?.[0];
    if (file) void analyze(file);
  });

  retryButton.addEventListener("click", () => {
    if (lastFile && !pending) void analyze(lastFile);
  });

  dismissButton.addEventListener("click", () => {
    errorPanel.hidden = true;
  });

  thresholdInput.addEventListener("input", () => {
    thresholdValue.textContent = currentThreshold().toFixed(2);
    // pure client-side re-labeling from the stored probabilities
    renderResults();
  });

  return {
    analyze,
    get pending() {
      return pending;
    },
    get report() {
      return report;
    },
  };
}

export async function renderHealthBadge(root: HTMLElement, client: ApiClient): Promise<void> {
  const badge = el("span", { class: "health-badge", "data-testid": "health-badge" });
  root.prepend(badge);
  try {
    const health = await client.health();
    badge.textContent =
      health.status === "ok"
        ? `service ok | model ${health.model_id} | detector ${health.backend_name}`
        : "service unavailable (no model loaded)";
    badge.className = `health-badge health-${health.status === "ok" ? "ok" : "down"}`;
  } catch {
    badge.textContent = "service unreachable";
    badge.className = "health-badge health-down";
  }
}
