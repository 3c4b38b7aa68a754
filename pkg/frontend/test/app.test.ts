import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiError, createClient, type ApiClient } from "../src/api";
import { buildView, labelFor } from "../src/state";
import { createApp } from "../src/view";
import type { PredictionReport, PredictParams } from "../src/types";

type PredictFn = (file: File, params: PredictParams) => Promise<PredictionReport>;
type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

function box(x: number, y: number, w = 120, h = 120) {
  return { x, y, w, h, confidence: 1.0, applied_scale: 1.0 };
}

function twoFaceReport(): PredictionReport {
  return {
    media_type: "image",
    frames_analyzed: 1,
    faces: [
      { frame_index: 0, box: box(30, 40), probability_fake: 0.2, label: "REAL" },
      { frame_index: 0, box: box(180, 190), probability_fake: 0.8, label: "FAKE" },
    ],
    aggregate: { probability_fake: 0.5, label: "FAKE", threshold: 0.5 },
    model_id: "abc123def456",
  };
}

function noFaceReport(): PredictionReport {
  return {
    media_type: "image",
    frames_analyzed: 1,
    faces: [],
    aggregate: { probability_fake: null, label: "no_face_detected", threshold: 0.5 },
    model_id: "abc123def456",
  };
}

function videoReport(): PredictionReport {
  return {
    media_type: "video",
    frames_analyzed: 3,
    faces: [
      { frame_index: 2, box: box(10, 10), probability_fake: 0.9, label: "FAKE" },
      { frame_index: 7, box: box(40, 40), probability_fake: 0.1, label: "REAL" },
      { frame_index: 7, box: box(200, 90), probability_fake: 0.7, label: "FAKE" },
    ],
    aggregate: { probability_fake: 0.5666, label: "FAKE", threshold: 0.5 },
    model_id: "abc123def456",
  };
}

function mockClient(report: PredictionReport | (() => Promise<PredictionReport>)) {
  const impl: PredictFn =
    typeof report === "function" ? report : async () => report;
  const predict = vi.fn<PredictFn>(impl);
  const client: ApiClient = {
    predict,
    health: vi.fn(async () => ({
      status: "ok", model_id: "abc123def456", backend_name: "stub",
    })),
  };
  return { client, predict };
}

function probeFile(): File {
  return new File([new Uint8Array([137, 80, 78, 71])], "probe.png", {
    type: "image/png",
  });
}

function query<T extends HTMLElement>(root: HTMLElement, testId: string): T {
  const node = root.querySelector<T>(`[data-testid="${testId}"]`);
  if (!node) throw new Error(`missing [data-testid=${testId}]`);
  return node;
}

function queryAll<T extends HTMLElement>(root: HTMLElement, testId: string): T[] {
  return [...root.querySelectorAll<T>(`[data-testid="${testId}"]`)];
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
});

describe("two-face report", () => {
  it("renders two overlays and a FAKE banner at threshold 0.5", async () => {
    const { client, predict } = mockClient(twoFaceReport());
    const app = createApp(root, client);
    await app.analyze(probeFile());

    expect(predict).toHaveBeenCalledTimes(1);
    const overlays = queryAll(root, "face-overlay");
    expect(overlays).toHaveLength(2);
    const banner = query(root, "banner");
    expect(banner.getAttribute("data-verdict")).toBe("FAKE");
    expect(banner.textContent).toContain("Counterfeit");
    expect(overlays.map((o) => o.getAttribute("data-label"))).toEqual(
      ["REAL", "FAKE"],
    );
  });

  it("moving the slider to 0.9 flips the banner with zero network calls", async () => {
    const { client, predict } = mockClient(twoFaceReport());
    const app = createApp(root, client);
    await app.analyze(probeFile());
    expect(predict).toHaveBeenCalledTimes(1);

    const slider = query<HTMLInputElement>(root, "threshold-slider");
    slider.value = "0.9";
    slider.dispatchEvent(new Event("input", { bubbles: true }));

    const banner = query(root, "banner");
    expect(banner.getAttribute("data-verdict")).toBe("REAL");
    expect(banner.textContent).toContain("Looks real");
    // 0.8 < 0.9: both faces now REAL, probabilities untouched
    const overlays = queryAll(root, "face-overlay");
    expect(overlays.map((o) => o.getAttribute("data-label"))).toEqual(
      ["REAL", "REAL"],
    );
    expect(overlays.map((o) => o.getAttribute("data-probability"))).toEqual(
      ["0.2", "0.8"],
    );
    expect(predict).toHaveBeenCalledTimes(1);
  });

  it("never mutates the stored report when re-thresholding", async () => {
    const report = twoFaceReport();
    Object.freeze(report);
    Object.freeze(report.faces);
    report.faces.forEach((f) => Object.freeze(f));
    Object.freeze(report.aggregate);
    const { client } = mockClient(report);
    const app = createApp(root, client);
    await app.analyze(probeFile());

    const slider = query<HTMLInputElement>(root, "threshold-slider");
    for (const value of ["0.9", "0.1", "0.5"]) {
      slider.value = value;
      slider.dispatchEvent(new Event("input", { bubbles: true }));
    }
    expect(app.report).toEqual(twoFaceReport());
  });

  it("re-labels per-face chips consistently with p >= threshold", async () => {
    const { client } = mockClient(twoFaceReport());
    const app = createApp(root, client);
    await app.analyze(probeFile());
    const slider = query<HTMLInputElement>(root, "threshold-slider");
    for (const value of [0.1, 0.2, 0.5, 0.79, 0.8, 0.95]) {
      slider.value = String(value);
      slider.dispatchEvent(new Event("input", { bubbles: true }));
      for (const overlay of queryAll(root, "face-overlay")) {
        const p = Number(overlay.getAttribute("data-probability"));
        expect(overlay.getAttribute("data-label")).toBe(labelFor(p, value));
      }
    }
  });
});

describe("degenerate and error states", () => {
  it("renders the neutral state for no_face_detected", async () => {
    const { client } = mockClient(noFaceReport());
    const app = createApp(root, client);
    await app.analyze(probeFile());
    const banner = query(root, "banner");
    expect(banner.getAttribute("data-verdict")).toBe("no_face_detected");
    expect(banner.textContent?.toLowerCase()).toContain("no face");
    expect(queryAll(root, "face-overlay")).toHaveLength(0);
  });

  it("surfaces service errors in a dismissible panel with a manual retry", async () => {
    let calls = 0;
    const { client, predict } = mockClient(async () => {
      calls += 1;
      if (calls === 1) throw new ApiError(503, "model_not_loaded");
      return twoFaceReport();
    });
    const app = createApp(root, client);
    await app.analyze(probeFile());

    const panel = query(root, "error-panel");
    expect(panel.hidden).toBe(false);
    expect(query(root, "error-message").textContent).toContain("503");
    expect(predict).toHaveBeenCalledTimes(1); // no automatic retry storm

    query<HTMLButtonElement>(root, "error-retry").click();
    await vi.waitFor(() => expect(app.pending).toBe(false));
    expect(predict).toHaveBeenCalledTimes(2);
    expect(panel.hidden).toBe(true);
    expect(query(root, "banner").getAttribute("data-verdict")).toBe("FAKE");
  });

  it("dismiss hides the panel without a network call", async () => {
    const { client, predict } = mockClient(async () => {
      throw new ApiError(400, "unsupported_media");
    });
    const app = createApp(root, client);
    await app.analyze(probeFile());
    const panel = query(root, "error-panel");
    expect(panel.hidden).toBe(false);
    query<HTMLButtonElement>(root, "error-dismiss").click();
    expect(panel.hidden).toBe(true);
    expect(predict).toHaveBeenCalledTimes(1);
  });
});

describe("request lifecycle", () => {
  it("allows one in-flight prediction and disables controls while pending", async () => {
    let release!: (report: PredictionReport) => void;
    const gate = new Promise<PredictionReport>((resolve) => (release = resolve));
    const { client, predict } = mockClient(() => gate);
    const app = createApp(root, client);

    const first = app.analyze(probeFile());
    expect(app.pending).toBe(true);
    expect(query<HTMLButtonElement>(root, "analyze-button").disabled).toBe(true);
    expect(query<HTMLInputElement>(root, "file-input").disabled).toBe(true);
    expect(query<HTMLInputElement>(root, "threshold-slider").disabled).toBe(true);

    await app.analyze(probeFile()); // ignored: one request at a time
    expect(predict).toHaveBeenCalledTimes(1);

    release(twoFaceReport());
    await first;
    expect(app.pending).toBe(false);
    expect(query<HTMLButtonElement>(root, "analyze-button").disabled).toBe(false);
  });

  it("submits the selected file through the form", async () => {
    const { client, predict } = mockClient(twoFaceReport());
    const app = createApp(root, client);
    const input = query<HTMLInputElement>(root, "file-input");
    Object.defineProperty(input, "files", { value: [probeFile()] });
    query(root, "controls").dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    await vi.waitFor(() => expect(app.report).not.toBeNull());
    expect(predict).toHaveBeenCalledTimes(1);
    const [file, params] = predict.mock.calls[0]!;
    expect((file as File).name).toBe("probe.png");
    expect(params).toMatchObject({ frames: 10, threshold: 0.5, seed: null });
  });

  it("keeps the session storage-free", async () => {
    const { client } = mockClient(twoFaceReport());
    const app = createApp(root, client);
    await app.analyze(probeFile());
    expect(window.localStorage.length).toBe(0);
    expect(window.sessionStorage.length).toBe(0);
  });
});

describe("video reports", () => {
  it("renders one tile per sampled frame with its faces grouped", async () => {
    const { client } = mockClient(videoReport());
    const app = createApp(root, client);
    await app.analyze(probeFile());
    const tiles = queryAll(root, "frame-tile");
    expect(tiles).toHaveLength(2);
    expect(tiles.map((t) => t.getAttribute("data-frame-index"))).toEqual(["2", "7"]);
    expect(tiles[1]!.querySelectorAll('[data-testid="face-overlay"]')).toHaveLength(2);
    expect(query(root, "meta").textContent).toContain("3 frame(s)");
  });
});

describe("view-model", () => {
  it("labelFor follows the threshold tie rule", () => {
    expect(labelFor(0.5, 0.5)).toBe("FAKE");
    expect(labelFor(0.4999, 0.5)).toBe("REAL");
    expect(labelFor(0.9, 0.89)).toBe("FAKE");
  });

  it("buildView groups faces by frame and relabels", () => {
    const view = buildView(videoReport(), 0.95);
    expect(view.frames.map((f) => f.frameIndex)).toEqual([2, 7]);
    expect(view.faces.every((f) => f.label === "REAL")).toBe(true);
    expect(view.aggregateLabel).toBe("REAL");
  });

  it("buildView flags no_face_detected", () => {
    const view = buildView(noFaceReport(), 0.5);
    expect(view.aggregateLabel).toBe("no_face_detected");
    expect(view.frames).toHaveLength(0);
  });
});

describe("api client", () => {
  it("posts multipart with query params and parses the report", async () => {
    const fetchMock = vi.fn<FetchFn>(async (url: string, init?: RequestInit) => {
      expect(url).toBe("/api/v1/predict?frames=5&threshold=0.7&seed=11");
      expect(init?.method).toBe("POST");
      expect(init?.body).toBeInstanceOf(FormData);
      const body = init!.body as FormData;
      expect((body.get("file") as File).name).toBe("probe.png");
      return new Response(JSON.stringify(twoFaceReport()), { status: 200 });
    });
    const client = createClient("", fetchMock);
    const report = await client.predict(probeFile(), {
      frames: 5, threshold: 0.7, seed: 11,
    });
    expect(report.faces).toHaveLength(2);
  });

  it("maps error bodies onto ApiError", async () => {
    const fetchMock = vi.fn<FetchFn>(async () =>
      new Response(JSON.stringify({ error: "missing_file" }), { status: 400 }),
    );
    const client = createClient("http://svc:8000", fetchMock);
    await expect(client.predict(probeFile(), {})).rejects.toMatchObject({
      status: 400,
      code: "missing_file",
    });
    expect(fetchMock.mock.calls[0]![0]).toBe("http://svc:8000/api/v1/predict");
  });

  it("reports unreachable services as status 0", async () => {
    const fetchMock = vi.fn(async () => {
      throw new TypeError("fetch failed");
    });
    const client = createClient("", fetchMock);
    await expect(client.predict(probeFile(), {})).rejects.toMatchObject({
      status: 0,
      code: "network_unreachable",
    });
  });
});
