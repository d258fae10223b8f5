/** Session state: the single source every rendered layer derives from.
 *
 * The store is synchronous and owns two monotonic request counters, one
 * for geocode queries and one for overlay fetches.  A response is applied
 * only when its ticket is still the newest, so slow in-flight responses
 * from superseded requests are discarded.
 */

import type { Bbox, GeocodeResponse, LeafCollection } from "./api.js";

export const WORLD_BBOX: Bbox = [-180, -90, 180, 90];

export interface SessionState {
  query: string;
  /** Last successful geocode response; layers derive from it. */
  response: GeocodeResponse | null;
  /** Invariant: 0 <= selectedRank < response.predictions.length when set. */
  selectedRank: number;
  overlayEnabled: boolean;
  overlayLeaves: LeafCollection | null;
  viewport: Bbox;
  /** Non-blocking error banner; null when hidden. */
  banner: string | null;
  pendingQuery: boolean;
}

export type Listener = (state: SessionState) => void;

export class SessionStore {
  private state: SessionState = {
    query: "",
    response: null,
    selectedRank: 0,
    overlayEnabled: false,
    overlayLeaves: null,
    viewport: WORLD_BBOX,
    banner: null,
    pendingQuery: false,
  };
  private listeners = new Set<Listener>();
  private querySeq = 0;
  private overlaySeq = 0;

  get(): SessionState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private patch(changes: Partial<SessionState>): void {
    this.state = { ...this.state, ...changes };
    for (const listener of this.listeners) listener(this.state);
  }

  setQuery(text: string): void {
    this.patch({ query: text });
  }

  /** Returns the ticket to pass back with the eventual response. */
  beginQuery(): number {
    this.patch({ pendingQuery: true });
    return ++this.querySeq;
  }

  /** Applies the response unless a newer query was submitted meanwhile. */
  resolveQuery(ticket: number, response: GeocodeResponse): boolean {
    if (ticket !== this.querySeq) return false;
    this.patch({
      response,
      selectedRank: 0,
      banner: null,
      pendingQuery: false,
    });
    return true;
  }

  /** Shows the banner but keeps previous layers; stale failures are dropped. */
  rejectQuery(ticket: number, message: string): boolean {
    if (ticket !== this.querySeq) return false;
    this.patch({ banner: message, pendingQuery: false });
    return true;
  }

  selectRank(rank: number): void {
    const count = this.state.response?.predictions.length ?? 0;
    if (!Number.isInteger(rank) || rank < 0 || rank >= count) {
      throw new RangeError(`rank ${rank} out of range for ${count} predictions`);
    }
    this.patch({ selectedRank: rank });
  }

  setOverlayEnabled(enabled: boolean): void {
    if (enabled === this.state.overlayEnabled) return;
    this.patch({
      overlayEnabled: enabled,
      overlayLeaves: enabled ? this.state.overlayLeaves : null,
    });
  }

  beginOverlayFetch(): number {
    return ++this.overlaySeq;
  }

  resolveOverlay(ticket: number, leaves: LeafCollection): boolean {
    if (ticket !== this.overlaySeq || !this.state.overlayEnabled) return false;
    this.patch({ overlayLeaves: leaves });
    return true;
  }

  rejectOverlay(ticket: number): boolean {
    return ticket === this.overlaySeq;
  }

  setViewport(viewport: Bbox): void {
    this.patch({ viewport });
  }

  setBanner(message: string | null): void {
    this.patch({ banner: message });
  }
}
