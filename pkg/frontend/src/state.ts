/** Application state: one store, no client-authoritative data.
 *
 * Everything shown is reconstructible from the server, so a refresh loses
 * nothing but the in-progress alignment transform. Verdict submission
 * holds a single in-flight slot; a second click while a POST is pending
 * is dropped, which is what makes rapid double-clicks record exactly one
 * verdict.
 */

import { ApiClient, ApiError } from "./api.js";
import { clampRotation, identityTransform, type Transform } from "./geometry.js";
import type {
  CandidateResponse,
  FragmentDetail,
  FragmentSummary,
  Group,
  MatchRecord,
  Method,
  Verdict,
} from "./types.js";

export type GroupFilter = Group | "all";

export interface WorkingPair {
  target: FragmentDetail;
  candidate: FragmentDetail;
  rank: number;
  score: number;
}

export interface ViewOptions {
  overlay: boolean;
  edgeEnhance: boolean;
  layerSwap: boolean;
}

export type Listener = () => void;

export class AppStore {
  fragments: FragmentSummary[] = [];
  groupFilter: GroupFilter = "all";
  selectedTarget: FragmentDetail | null = null;
  candidates: CandidateResponse | null = null;
  k = 10;
  method: Method = "wisepanda";
  matches: MatchRecord[] = [];
  pair: WorkingPair | null = null;
  transform: Transform = identityTransform();
  view: ViewOptions = { overlay: true, edgeEnhance: false, layerSwap: false };
  banner: string | null = null;
  toast: string | null = null;
  verdictInFlight = false;
  loading = false;

  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  visibleFragments(): FragmentSummary[] {
    if (this.groupFilter === "all") return this.fragments;
    return this.fragments.filter((f) => f.group === this.groupFilter);
  }

  /** Candidate ids already confirmed for the selected target. */
  verifiedCandidateIds(): Set<string> {
    const ids = new Set<string>();
    const target = this.selectedTarget;
    if (!target) return ids;
    for (const record of this.matches) {
      if (record.target_id === target.id && record.verdict === "confirmed") {
        ids.add(record.candidate_id);
      }
    }
    return ids;
  }

  async loadAll(): Promise<void> {
    this.loading = true;
    this.banner = null;
    this.notify();
    try {
      this.fragments = await this.api.listFragments();
      this.matches = await this.api.listMatches();
    } catch (err) {
      this.banner = describeError(err);
    } finally {
      this.loading = false;
      this.notify();
    }
  }

  setGroupFilter(filter: GroupFilter): void {
    this.groupFilter = filter;
    this.notify();
  }

  async selectTarget(id: string): Promise<void> {
    try {
      this.selectedTarget = await this.api.getFragment(id);
      this.pair = null;
      this.candidates = null;
      this.notify();
      await this.refreshCandidates();
    } catch (err) {
      this.banner = describeError(err);
      this.notify();
    }
  }

  async setMethod(method: Method): Promise<void> {
    this.method = method;
    await this.refreshCandidates();
  }

  async setK(k: number): Promise<void> {
    this.k = k;
    await this.refreshCandidates();
  }

  async refreshCandidates(): Promise<void> {
    if (!this.selectedTarget) return;
    this.loading = true;
    this.notify();
    try {
      this.candidates = await this.api.getCandidates(
        this.selectedTarget.id,
        this.k,
        this.method,
      );
      this.banner = null;
    } catch (err) {
      this.candidates = null;
      this.banner = describeError(err);
    } finally {
      this.loading = false;
      this.notify();
    }
  }

  async openCandidate(candidateId: string): Promise<void> {
    const target = this.selectedTarget;
    const listed = this.candidates?.candidates.find(
      (c) => c.candidate_id === candidateId,
    );
    if (!target || !listed) return;
    try {
      const candidate = await this.api.getFragment(candidateId);
      this.pair = {
        target,
        candidate,
        rank: listed.rank,
        score: listed.score,
      };
      this.transform = identityTransform();
      this.notify();
    } catch (err) {
      this.banner = describeError(err);
      this.notify();
    }
  }

  translateBy(dx: number, dy: number): void {
    this.transform = {
      ...this.transform,
      dx: this.transform.dx + dx,
      dy: this.transform.dy + dy,
    };
    this.notify();
  }

  rotateBy(deltaDeg: number): void {
    this.transform = {
      ...this.transform,
      rotationDeg: clampRotation(this.transform.rotationDeg + deltaDeg),
    };
    this.notify();
  }

  resetTransform(): void {
    this.transform = identityTransform();
    this.notify();
  }

  setView(patch: Partial<ViewOptions>): void {
    this.view = { ...this.view, ...patch };
    this.notify();
  }

  /**
   * Records a verdict for the open pair. Returns the new record, or null
   * when the click was dropped because another POST is still in flight.
   */
  async submitVerdict(verdict: Verdict, note = ""): Promise<MatchRecord | null> {
    const pair = this.pair;
    if (!pair || this.verdictInFlight) return null;
    this.verdictInFlight = true;
    this.toast = null;
    this.notify();
    try {
      const record = await this.api.submitMatch({
        target_id: pair.target.id,
        candidate_id: pair.candidate.id,
        verdict,
        note,
        method: this.method,
        rank: pair.rank,
        confidence: pair.score,
      });
      this.matches = await this.api.listMatches();
      this.toast = `recorded #${record.record_id}: ${verdict}`;
      return record;
    } catch (err) {
      this.toast = `verdict failed: ${describeError(err)}`;
      return null;
    } finally {
      this.verdictInFlight = false;
      this.notify();
    }
  }
}

export function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return `${err.code}: ${err.message}`;
  }
  return String(err);
}
