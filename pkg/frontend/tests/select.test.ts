/** Switching between ranked alternatives. */

import { beforeEach, describe, expect, it } from "vitest";
import { createApp, type App } from "../src/app.js";
import { cityResponse, emptyPartitionLeaves, FakeApi } from "./fixtures.js";

let root: HTMLElement;
let api: FakeApi;
let app: App;

beforeEach(async () => {
  document.body.innerHTML = "";
  root = document.createElement("div");
  document.body.appendChild(root);
  api = new FakeApi();
  api.onGeocode = () => Promise.resolve(cityResponse);
  api.onLeaves = () => Promise.resolve(emptyPartitionLeaves);
  app = createApp(root, api);
  app.store.setQuery("old harbor town");
  await app.submit();
});

function clickRank(rank: number): void {
  const item = root.querySelector(`#alternatives li[data-rank="${rank}"] button`);
  (item as HTMLButtonElement).click();
}

describe("alternative selection", () => {
  it("switches the highlight to the chosen prediction", () => {
    clickRank(1);

    const filled = app.map.predictionLayer.querySelectorAll("path.cell-fill");
    expect(filled).toHaveLength(1);
    expect(filled[0]!.getAttribute("data-label")).toBe("20");
    const outlined = app.map.predictionLayer.querySelectorAll("path.cell-outline");
    expect(Array.from(outlined, (p) => p.getAttribute("data-label"))).toEqual(["2"]);
    expect(app.store.get().selectedRank).toBe(1);

    const items = root.querySelectorAll("#alternatives li");
    expect(items[1]!.classList.contains("selected")).toBe(true);
    expect(items[0]!.classList.contains("selected")).toBe(false);
  });

  it("touches only the highlight layer when the rank changes", async () => {
    const toggle = root.querySelector("#overlay-toggle") as HTMLInputElement;
    toggle.checked = true;
    toggle.dispatchEvent(new Event("change", { bubbles: true }));
    await app.refreshOverlay();

    const gridLayer = app.map.gridLayer;
    const gridMarkup = gridLayer.innerHTML;
    const gridNodes = Array.from(gridLayer.children);
    expect(gridNodes.length).toBeGreaterThan(0);
    const viewBox = app.map.svg.getAttribute("viewBox");

    clickRank(1);

    expect(app.map.gridLayer).toBe(gridLayer);
    expect(app.map.gridLayer.innerHTML).toBe(gridMarkup);
    Array.from(app.map.gridLayer.children).forEach((child, i) => {
      expect(child).toBe(gridNodes[i]);
    });
    expect(app.map.svg.getAttribute("viewBox")).toBe(viewBox);
    expect(
      app.map.predictionLayer.querySelector("path.cell-fill")!.getAttribute("data-label"),
    ).toBe("20");
  });

  it("returns to the initial markup when rank 0 is reselected", () => {
    const initial = app.map.predictionLayer.innerHTML;
    clickRank(1);
    expect(app.map.predictionLayer.innerHTML).not.toBe(initial);
    clickRank(0);
    expect(app.map.predictionLayer.innerHTML).toBe(initial);
  });

  it("offers no control beyond the ranked list", () => {
    expect(root.querySelectorAll("#alternatives li")).toHaveLength(
      cityResponse.predictions.length,
    );
    expect(() => app.store.selectRank(cityResponse.predictions.length)).toThrow(
      RangeError,
    );
  });
});
