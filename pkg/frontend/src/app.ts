/** Application wiring: DOM, events, fetch lifecycles.
 *
 * Every rendered element derives from the store's state; the app only
 * dispatches events into the store and mirrors state back out.  Geocode
 * and overlay requests carry monotonic tickets so a response that was
 * superseded while in flight is discarded instead of rendered.
 */

import type { Bbox, GeocellsApi } from "./api.js";
import { geometryBounds, MapView, padBbox } from "./mapview.js";
import { SessionStore, type SessionState } from "./state.js";

export interface AppOptions {
  topK?: number;
  beamWidth?: number;
  /** Delay before retrying a failed partition-overlay fetch. */
  overlayRetryMs?: number;
}

export interface App {
  store: SessionStore;
  map: MapView;
  root: HTMLElement;
  submit(): Promise<void>;
  refreshOverlay(): Promise<void>;
  zoomTo(bbox: Bbox): Promise<void>;
  dispose(): void;
}

function messageOf(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}

export function createApp(
  root: HTMLElement,
  api: GeocellsApi,
  options: AppOptions = {},
): App {
  const doc = root.ownerDocument;
  const store = new SessionStore();
  const map = new MapView(doc);
  const retryMs = options.overlayRetryMs ?? 1000;
  let retryTimer: ReturnType<typeof setTimeout> | null = null;

  root.innerHTML = `
    <form id="query-form">
      <input id="query-input" type="text" autocomplete="off"
             placeholder="Describe a place" aria-label="query text">
      <button id="query-submit" type="submit" disabled>Geocode</button>
      <label id="overlay-control">
        <input id="overlay-toggle" type="checkbox"> partition grid
      </label>
    </form>
    <div id="banner" role="alert" hidden></div>
    <div id="layout">
      <ol id="alternatives" aria-label="ranked predictions"></ol>
    </div>
  `;
  const form = root.querySelector("#query-form") as HTMLFormElement;
  const input = root.querySelector("#query-input") as HTMLInputElement;
  const submitButton = root.querySelector("#query-submit") as HTMLButtonElement;
  const overlayToggle = root.querySelector("#overlay-toggle") as HTMLInputElement;
  const banner = root.querySelector("#banner") as HTMLElement;
  const layout = root.querySelector("#layout") as HTMLElement;
  const alternatives = root.querySelector("#alternatives") as HTMLOListElement;
  layout.insertBefore(map.svg, alternatives);

  function clearRetry(): void {
    if (retryTimer !== null) {
      clearTimeout(retryTimer);
      retryTimer = null;
    }
  }

  async function submit(): Promise<void> {
    const text = store.get().query.trim();
    if (!text) return;
    const ticket = store.beginQuery();
    try {
      const response = await api.geocode(text, {
        topK: options.topK,
        beamWidth: options.beamWidth,
      });
      if (!store.resolveQuery(ticket, response)) return;
      const top = response.predictions[0];
      if (top) {
        store.setViewport(padBbox(geometryBounds(top.polygon)));
        if (store.get().overlayEnabled) {
          void refreshOverlay();
        }
      }
    } catch (error) {
      store.rejectQuery(ticket, messageOf(error));
    }
  }

  async function refreshOverlay(): Promise<void> {
    clearRetry();
    if (!store.get().overlayEnabled) return;
    const ticket = store.beginOverlayFetch();
    try {
      const leaves = await api.leaves(store.get().viewport);
      store.resolveOverlay(ticket, leaves);
    } catch {
      if (store.rejectOverlay(ticket) && store.get().overlayEnabled) {
        retryTimer = setTimeout(() => {
          retryTimer = null;
          void refreshOverlay();
        }, retryMs);
      }
    }
  }

  async function zoomTo(bbox: Bbox): Promise<void> {
    store.setViewport(bbox);
    if (store.get().overlayEnabled) {
      await refreshOverlay();
    }
  }

  function render(state: SessionState): void {
    submitButton.disabled = !state.query.trim();
    if (input.value !== state.query) input.value = state.query;
    overlayToggle.checked = state.overlayEnabled;
    banner.hidden = !state.banner;
    banner.textContent = state.banner ?? "";
    renderAlternatives(state);
    map.render(state);
  }

  function renderAlternatives(state: SessionState): void {
    const items = (state.response?.predictions ?? []).map((pred, rank) => {
      const li = doc.createElement("li");
      li.setAttribute("data-rank", String(rank));
      if (rank === state.selectedRank) li.classList.add("selected");
      const button = doc.createElement("button");
      button.type = "button";
      button.textContent = `${pred.label}  p=${pred.probability.toFixed(3)}`;
      li.appendChild(button);
      return li;
    });
    alternatives.replaceChildren(...items);
  }

  input.addEventListener("input", () => store.setQuery(input.value));
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });
  overlayToggle.addEventListener("change", () => {
    store.setOverlayEnabled(overlayToggle.checked);
    if (overlayToggle.checked) {
      void refreshOverlay();
    } else {
      clearRetry();
    }
  });
  alternatives.addEventListener("click", (event) => {
    const item = (event.target as Element).closest("li[data-rank]");
    if (item) store.selectRank(Number(item.getAttribute("data-rank")));
  });

  const unsubscribe = store.subscribe(render);
  render(store.get());

  return {
    store,
    map,
    root,
    submit,
    refreshOverlay,
    zoomTo,
    dispose(): void {
      clearRetry();
      unsubscribe();
    },
  };
}
