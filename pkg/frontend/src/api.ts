/** Typed client for the review service.
 *
 * Every non-2xx response carries `{"error": {"code", "message"}}`; that
 * envelope is surfaced as an ApiError so callers can branch on the stable
 * code. A fetch that never reaches the server becomes code "unreachable".
 */

import type {
  CandidateResponse,
  FragmentDetail,
  FragmentSummary,
  Group,
  HealthInfo,
  MatchRecord,
  MatchSubmission,
  Method,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError("unreachable", `service unreachable: ${String(err)}`, 0);
    }
    if (response.ok) {
      return (await response.json()) as T;
    }
    let code = "internal";
    let message = `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as {
        error?: { code?: string; message?: string };
      };
      if (body.error?.code) code = body.error.code;
      if (body.error?.message) message = body.error.message;
    } catch {
      // keep the generic message when the body is not the envelope
    }
    throw new ApiError(code, message, response.status);
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/api/health");
  }

  async listFragments(group?: Group): Promise<FragmentSummary[]> {
    const query = group ? `?group=${encodeURIComponent(group)}` : "";
    const body = await this.request<{ fragments: FragmentSummary[] }>(
      `/api/fragments${query}`,
    );
    return body.fragments;
  }

  getFragment(id: string): Promise<FragmentDetail> {
    return this.request<FragmentDetail>(
      `/api/fragments/${encodeURIComponent(id)}`,
    );
  }

  getCandidates(id: string, k: number, method: Method): Promise<CandidateResponse> {
    const query = `?k=${k}&method=${encodeURIComponent(method)}`;
    return this.request<CandidateResponse>(
      `/api/fragments/${encodeURIComponent(id)}/candidates${query}`,
    );
  }

  async listMatches(targetId?: string): Promise<MatchRecord[]> {
    const query = targetId ? `?target_id=${encodeURIComponent(targetId)}` : "";
    const body = await this.request<{ matches: MatchRecord[] }>(
      `/api/matches${query}`,
    );
    return body.matches;
  }

  submitMatch(submission: MatchSubmission): Promise<MatchRecord> {
    return this.request<MatchRecord>("/api/matches", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(submission),
    });
  }
}
