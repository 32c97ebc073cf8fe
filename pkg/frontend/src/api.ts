/** Typed fetch client for the scoring service.
 *
 * Server-reported failures become ApiError (status + machine code); network
 * failures surface as NetworkError so the UI can show a retry banner without
 * losing state.
 */

import type { ApiErrorBody, BallotAck, Distribution, NextImage, Score } from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`network failure: ${String(cause)}`);
    this.name = "NetworkError";
  }
}

export interface ApiClient {
  nextImage(raterId: string): Promise<NextImage>;
  submitBallot(raterId: string, imageId: string, score: Score): Promise<BallotAck>;
  distribution(imageId: string): Promise<Distribution>;
  imageUrl(pixelsUrl: string): string;
}

async function parseError(resp: Response): Promise<ApiError> {
  try {
    const body = (await resp.json()) as ApiErrorBody;
    if (body && typeof body.code === "string") {
      return new ApiError(resp.status, body.code, body.message ?? body.code);
    }
  } catch {
    // fall through to the generic error below
  }
  return new ApiError(resp.status, "http_error", `${resp.status} ${resp.statusText}`);
}

export function createApiClient(baseUrl = ""): ApiClient {
  const base = baseUrl.replace(/\/+$/, "");

  async function request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await fetch(base + path, init);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (!resp.ok) {
      throw await parseError(resp);
    }
    return (await resp.json()) as T;
  }

  return {
    nextImage: (raterId) =>
      request<NextImage>(`/api/next?rater=${encodeURIComponent(raterId)}`),
    submitBallot: (raterId, imageId, score) =>
      request<BallotAck>("/api/ballots", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ rater_id: raterId, image_id: imageId, score }),
      }),
    distribution: (imageId) =>
      request<Distribution>(`/api/images/${encodeURIComponent(imageId)}/distribution`),
    imageUrl: (pixelsUrl) => base + pixelsUrl,
  };
}
