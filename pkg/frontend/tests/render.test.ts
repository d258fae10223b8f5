/** Query rendering: filled winner, outlined ancestors, ranked sidebar. */

import { beforeEach, describe, expect, it } from "vitest";
import { createApp, type App } from "../src/app.js";
import { geometryBounds, padBbox } from "../src/mapview.js";
import { WORLD_BBOX } from "../src/state.js";
import {
  cityResponse,
  FakeApi,
  faceThreeResponse,
  splitCellResponse,
} from "./fixtures.js";

let root: HTMLElement;
let api: FakeApi;
let app: App;

beforeEach(() => {
  document.body.innerHTML = "";
  root = document.createElement("div");
  document.body.appendChild(root);
  api = new FakeApi();
  app = createApp(root, api);
});

function typeQuery(text: string): void {
  const input = root.querySelector("#query-input") as HTMLInputElement;
  input.value = text;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

async function submitQuery(text: string): Promise<void> {
  typeQuery(text);
  await app.submit();
}

describe("query rendering", () => {
  it("fills the top-ranked cell and outlines its ancestors", async () => {
    api.onGeocode = () => Promise.resolve(cityResponse);
    await submitQuery("old harbor town");

    const filled = app.map.predictionLayer.querySelectorAll("path.cell-fill");
    expect(filled).toHaveLength(1);
    expect(filled[0]!.getAttribute("data-label")).toBe("310");
    expect(filled[0]!.getAttribute("fill")).not.toBe("none");

    const outlined = app.map.predictionLayer.querySelectorAll("path.cell-outline");
    const labels = Array.from(outlined, (p) => p.getAttribute("data-label"));
    expect(labels).toEqual(["3", "31"]);
    for (const path of outlined) {
      expect(path.getAttribute("fill")).toBe("none");
    }
  });

  it("renders a forced face-3 fixture with a label starting in 3", async () => {
    api.onGeocode = () => Promise.resolve(faceThreeResponse);
    await submitQuery("pin to face three");

    const filled = app.map.predictionLayer.querySelector("path.cell-fill");
    expect(filled!.getAttribute("data-label")!.startsWith("3")).toBe(true);
    expect(app.map.predictionLayer.querySelectorAll("path.cell-outline")).toHaveLength(0);
  });

  it("lists ranked alternatives with probabilities", async () => {
    api.onGeocode = () => Promise.resolve(cityResponse);
    await submitQuery("old harbor town");

    const items = root.querySelectorAll("#alternatives li");
    expect(items).toHaveLength(2);
    expect(items[0]!.textContent).toContain("310");
    expect(items[0]!.textContent).toContain("0.620");
    expect(items[1]!.textContent).toContain("20");
    expect(items[0]!.classList.contains("selected")).toBe(true);
  });

  it("fits the viewport to the winning cell", async () => {
    api.onGeocode = () => Promise.resolve(cityResponse);
    await submitQuery("old harbor town");

    const expected = padBbox(geometryBounds(cityResponse.predictions[0]!.polygon));
    expect(app.store.get().viewport).toEqual(expected);
    const [west, south, east, north] = expected;
    expect(app.map.svg.getAttribute("viewBox")).toBe(
      `${west} ${-north} ${east - west} ${north - south}`,
    );
  });

  it("disables submit while the query is empty", () => {
    const button = root.querySelector("#query-submit") as HTMLButtonElement;
    expect(button.disabled).toBe(true);
    typeQuery("anywhere");
    expect(button.disabled).toBe(false);
    typeQuery("   ");
    expect(button.disabled).toBe(true);
  });

  it("never calls the service for blank input", async () => {
    await submitQuery("   ");
    expect(api.geocodeCalls).toHaveLength(0);
  });

  it("re-rendering the same state leaves identical markup", async () => {
    api.onGeocode = () => Promise.resolve(cityResponse);
    await submitQuery("old harbor town");

    const before = app.map.svg.outerHTML;
    app.map.render(app.store.get());
    app.map.render(app.store.get());
    expect(app.map.svg.outerHTML).toBe(before);
  });

  it("draws antimeridian-split cells as sibling paths with one identity", async () => {
    api.onGeocode = () => Promise.resolve(splitCellResponse);
    await submitQuery("somewhere past the dateline");

    const filled = app.map.predictionLayer.querySelectorAll("path.cell-fill");
    expect(filled).toHaveLength(2);
    expect(filled[0]!.getAttribute("data-label")).toBe("42");
    expect(filled[1]!.getAttribute("data-label")).toBe("42");
  });

  it("shows a banner on failure and keeps the previous layers", async () => {
    api.onGeocode = () => Promise.resolve(cityResponse);
    await submitQuery("old harbor town");
    const renderedBefore = app.map.predictionLayer.innerHTML;

    api.onGeocode = () => Promise.reject(new Error("model not loaded"));
    await submitQuery("another place");

    const banner = root.querySelector("#banner") as HTMLElement;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toBe("model not loaded");
    expect(app.map.predictionLayer.innerHTML).toBe(renderedBefore);
    expect(app.store.get().response).toBe(cityResponse);
  });

  it("starts from a world viewport with nothing rendered", () => {
    expect(app.store.get().viewport).toEqual(WORLD_BBOX);
    expect(app.map.predictionLayer.children).toHaveLength(0);
    expect(app.map.gridLayer.children).toHaveLength(0);
  });
});
