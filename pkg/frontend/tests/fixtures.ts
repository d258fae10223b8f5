/** Recorded-style API fixtures and a controllable fake client. */

import type {
  Bbox,
  CellGeometry,
  GeocellsApi,
  GeocodeOptions,
  GeocodeResponse,
  HealthResponse,
  LeafCollection,
  LeafFeature,
  Prediction,
  Ring,
} from "../src/api.js";

export function squareRing(west: number, south: number, east: number, north: number): Ring {
  return [
    [west, south],
    [east, south],
    [east, north],
    [west, north],
    [west, south],
  ];
}

export function polygon(west: number, south: number, east: number, north: number): CellGeometry {
  return { type: "Polygon", coordinates: [squareRing(west, south, east, north)] };
}

function leaf(label: string, box: [number, number, number, number], count = 0): LeafFeature {
  return {
    type: "Feature",
    geometry: polygon(...box),
    properties: { label, level: label.length - 1, count, area_km2: 1000 },
  };
}

/** A replay-style response that pins the whole query to face 3. */
export const faceThreeResponse: GeocodeResponse = {
  model_id: "replay/abc123def456",
  text: "pin to face three",
  predictions: [
    {
      label: "3",
      probability: 1.0,
      level: 0,
      center: { lat: 0, lon: -180 },
      polygon: polygon(-180, -45, -135, 45),
      ancestors: [],
    },
  ],
};

const rankZero: Prediction = {
  label: "310",
  probability: 0.62,
  level: 2,
  center: { lat: 48.5, lon: 2.5 },
  polygon: polygon(2, 48, 3, 49),
  ancestors: [
    { label: "3", polygon: polygon(-10, 30, 30, 60) },
    { label: "31", polygon: polygon(0, 45, 10, 55) },
  ],
};

const rankOne: Prediction = {
  label: "20",
  probability: 0.21,
  level: 1,
  center: { lat: -20, lon: 140 },
  polygon: polygon(135, -25, 145, -15),
  ancestors: [{ label: "2", polygon: polygon(120, -40, 160, 0) }],
};

/** Two ranked alternatives with ancestors, for selection tests. */
export const cityResponse: GeocodeResponse = {
  model_id: "baseline/0123456789ab",
  text: "old harbor town",
  predictions: [rankZero, rankOne],
};

/** An antimeridian-crossing cell served as a split MultiPolygon. */
export const splitCellResponse: GeocodeResponse = {
  model_id: "baseline/0123456789ab",
  text: "somewhere past the dateline",
  predictions: [
    {
      label: "42",
      probability: 0.9,
      level: 1,
      center: { lat: 10, lon: 180 },
      polygon: {
        type: "MultiPolygon",
        coordinates: [
          [squareRing(170, 0, 180, 20)],
          [squareRing(-180, 0, -170, 20)],
        ],
      },
      ancestors: [],
    },
  ],
};

/** The whole globe as the six face cells (an empty partition). */
export const emptyPartitionLeaves: LeafCollection = {
  type: "FeatureCollection",
  features: [
    leaf("0", [45, -35, 135, 35]),
    leaf("1", [135, -35, 180, 35]),
    leaf("2", [-180, 35, 180, 90]),
    leaf("3", [-135, -35, -45, 35]),
    leaf("4", [-45, -35, 45, 35]),
    leaf("5", [-180, -90, 180, -35]),
  ],
};

/** Coarse cells globally, finer cells over one sampled cluster. */
export const clusteredLeaves: LeafCollection = {
  type: "FeatureCollection",
  features: [
    leaf("0", [45, -35, 135, 35], 12),
    leaf("1", [135, -35, 180, 35], 3),
    leaf("2", [-180, 35, 180, 90], 9),
    leaf("300", [-135, 20, -120, 35], 28),
    leaf("3010", [-120, 28, -112, 35], 30),
    leaf("3011", [-112, 28, -105, 35], 27),
    leaf("302", [-120, 20, -105, 28], 22),
    leaf("31", [-105, 20, -45, 35], 8),
    leaf("32", [-135, -35, -45, 20], 5),
    leaf("4", [-45, -35, 45, 35], 1),
    leaf("5", [-180, -90, 180, -35], 0),
  ],
};

export interface Deferred<T> {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (error: unknown) => void;
}

export function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (error: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

/** Fake client: tests swap the handlers and inspect the recorded calls. */
export class FakeApi implements GeocellsApi {
  geocodeCalls: { text: string; options?: GeocodeOptions }[] = [];
  leavesCalls: (Bbox | undefined)[] = [];
  onGeocode: (text: string) => Promise<GeocodeResponse> = () =>
    Promise.reject(new Error("no geocode handler"));
  onLeaves: (bbox?: Bbox) => Promise<LeafCollection> = () =>
    Promise.reject(new Error("no leaves handler"));

  geocode(text: string, options?: GeocodeOptions): Promise<GeocodeResponse> {
    this.geocodeCalls.push({ text, options });
    return this.onGeocode(text);
  }

  leaves(bbox?: Bbox): Promise<LeafCollection> {
    this.leavesCalls.push(bbox);
    return this.onLeaves(bbox);
  }

  health(): Promise<HealthResponse> {
    return Promise.resolve({
      status: "ok",
      partition_checksum: "0".repeat(64),
      model_id: "baseline/0123456789ab",
      max_level: 9,
    });
  }
}
