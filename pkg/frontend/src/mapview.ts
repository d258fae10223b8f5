/** SVG world map: an equirectangular view of service-provided polygons.
 *
 * Two layers in fixed z-order: the partition grid underneath, then the
 * selected prediction (its cell filled, its ancestors outlined).  Layers
 * are memoized on the exact state objects they derive from, so a change
 * that does not touch a layer's inputs leaves its DOM nodes untouched.
 */

import type { Bbox, CellGeometry, LeafCollection, Prediction, Ring } from "./api.js";
import type { SessionState } from "./state.js";
import { WORLD_BBOX } from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const FILL_COLOR = "#1d6fd0";
const OUTLINE_COLOR = "#ffffff";
const GRID_COLOR = "#7b8a99";

/** Map coordinates: x = longitude, y = negated latitude (north up). */
function pathData(rings: Ring[]): string {
  const parts: string[] = [];
  for (const ring of rings) {
    const points = ring.map(([lon, lat]) => `${lon},${-lat}`);
    parts.push(`M${points.join("L")}Z`);
  }
  return parts.join("");
}

/** One closed-ring set per drawable polygon. */
function polygonsOf(geometry: CellGeometry): Ring[][] {
  if (geometry.type === "Polygon") return [geometry.coordinates];
  return geometry.coordinates;
}

/** Lon/lat bounding box over every vertex of the geometry. */
export function geometryBounds(geometry: CellGeometry): Bbox {
  let west = Infinity;
  let south = Infinity;
  let east = -Infinity;
  let north = -Infinity;
  for (const polygon of polygonsOf(geometry)) {
    for (const ring of polygon) {
      for (const [lon, lat] of ring) {
        west = Math.min(west, lon);
        east = Math.max(east, lon);
        south = Math.min(south, lat);
        north = Math.max(north, lat);
      }
    }
  }
  return [west, south, east, north];
}

/** Grow a box by a fraction per side, clamped to world bounds. */
export function padBbox(box: Bbox, fraction = 0.25, minSpan = 2): Bbox {
  const [west, south, east, north] = box;
  const padLon = Math.max(((east - west) * fraction + minSpan) / 2, 0);
  const padLat = Math.max(((north - south) * fraction + minSpan) / 2, 0);
  return [
    Math.max(-180, west - padLon),
    Math.max(-90, south - padLat),
    Math.min(180, east + padLon),
    Math.min(90, north + padLat),
  ];
}

export class MapView {
  readonly svg: SVGSVGElement;
  readonly gridLayer: SVGGElement;
  readonly predictionLayer: SVGGElement;
  private readonly doc: Document;
  private lastLeaves: LeafCollection | null | undefined;
  private lastPrediction: Prediction | null | undefined;

  constructor(doc: Document = document) {
    this.doc = doc;
    this.svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
    this.svg.setAttribute("id", "map");
    this.svg.setAttribute("viewBox", viewBoxOf(WORLD_BBOX));
    this.svg.setAttribute("preserveAspectRatio", "xMidYMid meet");
    this.gridLayer = doc.createElementNS(SVG_NS, "g") as SVGGElement;
    this.gridLayer.setAttribute("id", "grid-layer");
    this.predictionLayer = doc.createElementNS(SVG_NS, "g") as SVGGElement;
    this.predictionLayer.setAttribute("id", "prediction-layer");
    this.svg.appendChild(this.gridLayer);
    this.svg.appendChild(this.predictionLayer);
  }

  render(state: SessionState): void {
    const viewBox = viewBoxOf(state.viewport);
    if (this.svg.getAttribute("viewBox") !== viewBox) {
      this.svg.setAttribute("viewBox", viewBox);
    }
    this.renderGrid(state.overlayEnabled ? state.overlayLeaves : null);
    const prediction =
      state.response?.predictions[state.selectedRank] ?? null;
    this.renderPrediction(prediction);
  }

  private renderGrid(leaves: LeafCollection | null): void {
    if (leaves === this.lastLeaves) return;
    this.lastLeaves = leaves;
    this.gridLayer.replaceChildren();
    if (!leaves) return;
    for (const feature of leaves.features) {
      const { label, level, count } = feature.properties;
      for (const path of this.geometryPaths(feature.geometry, "leaf-cell")) {
        path.setAttribute("data-label", label);
        path.setAttribute("data-level", String(level));
        path.setAttribute("data-count", String(count));
        path.setAttribute("fill", "none");
        path.setAttribute("stroke", GRID_COLOR);
        path.setAttribute("stroke-width", "0.15");
        const title = this.doc.createElementNS(SVG_NS, "title");
        title.textContent = `${label}: ${count} samples`;
        path.appendChild(title);
        this.gridLayer.appendChild(path);
      }
    }
  }

  private renderPrediction(prediction: Prediction | null): void {
    if (prediction === this.lastPrediction) return;
    this.lastPrediction = prediction;
    this.predictionLayer.replaceChildren();
    if (!prediction) return;
    // Ancestors first (outlined), coarsest underneath ...
    for (const ancestor of prediction.ancestors) {
      for (const path of this.geometryPaths(ancestor.polygon, "cell-outline")) {
        path.setAttribute("data-label", ancestor.label);
        path.setAttribute("fill", "none");
        path.setAttribute("stroke", OUTLINE_COLOR);
        path.setAttribute("stroke-width", "0.4");
        this.predictionLayer.appendChild(path);
      }
    }
    // ... then the selected cell, filled.
    for (const path of this.geometryPaths(prediction.polygon, "cell-fill")) {
      path.setAttribute("data-label", prediction.label);
      path.setAttribute("fill", FILL_COLOR);
      path.setAttribute("fill-opacity", "0.45");
      path.setAttribute("stroke", FILL_COLOR);
      path.setAttribute("stroke-width", "0.3");
      this.predictionLayer.appendChild(path);
    }
  }

  /** One <path> per polygon; antimeridian-split halves share data-label. */
  private geometryPaths(geometry: CellGeometry, className: string): SVGPathElement[] {
    return polygonsOf(geometry).map((rings) => {
      const path = this.doc.createElementNS(SVG_NS, "path") as SVGPathElement;
      path.setAttribute("class", className);
      path.setAttribute("d", pathData(rings));
      return path;
    });
  }
}

function viewBoxOf(box: Bbox): string {
  let [west, south, east, north] = box;
  if (west >= east || south >= north) {
    [west, south, east, north] = WORLD_BBOX;
  }
  return `${west} ${-north} ${east - west} ${north - south}`;
}
