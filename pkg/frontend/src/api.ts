import type { HealthStatus, PredictionReport, PredictParams } from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail?: string,
  ) {
    super(detail ? `${code}: ${detail}` : code);
    this.name = "ApiError";
  }
}

export interface ApiClient {
  predict(file: File, params: PredictParams): Promise<PredictionReport>;
  health(): Promise<HealthStatus>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** The service origin: build-time VITE_API_BASE, a runtime global, or same-origin. */
export function resolveBaseUrl(): string {
  const runtime = (globalThis as Record<string, unknown>).VERIFRAME_API_BASE;
  if (typeof runtime === "string") return runtime;
  const buildTime = import.meta.env?.VITE_API_BASE;
  return typeof buildTime === "string" ? buildTime : "";
}

export function createClient(baseUrl = "", fetchFn?: FetchLike): ApiClient {
  const doFetch: FetchLike =
    fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  const root = baseUrl.replace(/\/$/, "");

  return {
    async predict(file, params) {
      const query = new URLSearchParams();
      if (params.frames !== undefined) query.set("frames", String(params.frames));
      if (params.threshold !== undefined) query.set("threshold", String(params.threshold));
      if (params.seed !== undefined && params.seed !== null && !Number.isNaN(params.seed)) {
        query.set("seed", String(params.seed));
      }
      const suffix = query.toString() ? `?${query}` : "";
      const body = new FormData();
      body.append("file", file, file.name);
      let response: Response;
      try {
        response = await doFetch(`${root}/api/v1/predict${suffix}`, {
          method: "POST",
          body,
        });
      } catch (error) {
        throw new ApiError(0, "network_unreachable", String(error));
      }
      if (!response.ok) {
        let code = `http_${response.status}`;
        let detail: string | undefined;
        try {
          const payload = (await response.json()) as { error?: string; detail?: string };
          if (payload.error) code = payload.error;
          detail = payload.detail;
        } catch {
          // non-JSON error body; keep the status code
        }
        throw new ApiError(response.status, code, detail);
      }
      return (await response.json()) as PredictionReport;
    },

    async health() {
      const response = await doFetch(`${root}/api/v1/health`);
      return (await response.json()) as HealthStatus;
    },
  };
}
