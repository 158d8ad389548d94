/** Wire types mirroring the review service's JSON API. */

export type Group = "upper" | "lower";

export type Method = "wisepanda" | "dtw" | "cosine";

export type Verdict = "confirmed" | "rejected";

export const METHODS: readonly Method[] = ["wisepanda", "dtw", "cosine"];

export const K_CHOICES = [10, 20, 50] as const;

export interface HealthInfo {
  status: string;
  version: string;
  dataset: string;
  n_fragments: number;
  n_pairs: number;
}

export interface FragmentSummary {
  id: string;
  group: Group;
  n_fibers: number;
  paired: boolean;
}

export interface FragmentDetail extends FragmentSummary {
  heights: number[];
  true_match: string | null;
}

export interface CandidateRow {
  rank: number;
  candidate_id: string;
  score: number;
  is_true_match: boolean;
}

export interface CandidateResponse {
  target_id: string;
  method: Method;
  k: number;
  pool_size: number;
  rank_of_truth: number | null;
  candidates: CandidateRow[];
}

export interface MatchRecord {
  record_id: number;
  timestamp: string;
  target_id: string;
  candidate_id: string;
  verdict: string;
  method: string;
  rank: number | null;
  confidence: number | null;
  note: string;
}

export interface MatchSubmission {
  target_id: string;
  candidate_id: string;
  verdict: Verdict;
  note?: string;
  method?: string;
  rank?: number | null;
  confidence?: number | null;
}
