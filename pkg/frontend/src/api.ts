/** Typed client for the geocells REST service.
 *
 * The client is the only place that touches the network; everything else
 * consumes its declared response shapes.  All polygons come from the
 * service verbatim, the client never derives geometry.
 */

export type Ring = [number, number][];

export interface PolygonGeometry {
  type: "Polygon";
  coordinates: Ring[];
}

export interface MultiPolygonGeometry {
  type: "MultiPolygon";
  coordinates: Ring[][];
}

export type CellGeometry = PolygonGeometry | MultiPolygonGeometry;

export interface AncestorCell {
  label: string;
  polygon: CellGeometry;
}

export interface Prediction {
  label: string;
  probability: number;
  level: number;
  center: { lat: number; lon: number };
  polygon: CellGeometry;
  ancestors: AncestorCell[];
}

export interface GeocodeResponse {
  model_id: string;
  text: string;
  predictions: Prediction[];
}

export interface LeafFeature {
  type: "Feature";
  geometry: CellGeometry;
  properties: { label: string; level: number; count: number; area_km2: number };
}

export interface LeafCollection {
  type: "FeatureCollection";
  features: LeafFeature[];
}

export interface HealthResponse {
  status: string;
  partition_checksum: string;
  model_id: string;
  max_level: number;
}

/** West, south, east, north in degrees; west > east wraps the antimeridian. */
export type Bbox = [number, number, number, number];

export interface GeocodeOptions {
  topK?: number;
  beamWidth?: number;
}

/** What the app needs from the service; tests substitute fakes. */
export interface GeocellsApi {
  geocode(text: string, options?: GeocodeOptions): Promise<GeocodeResponse>;
  leaves(bbox?: Bbox): Promise<LeafCollection>;
  health(): Promise<HealthResponse>;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let message = `request failed with status ${response.status}`;
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string" && body.detail) {
      message = body.detail;
    }
  } catch {
    // Non-JSON error body; keep the generic message.
  }
  throw new ApiError(response.status, message);
}

export class ApiClient implements GeocellsApi {
  private readonly base: string;

  /** The endpoint URL is the client's single configuration setting. */
  constructor(baseUrl: string, private readonly fetchImpl: typeof fetch = fetch) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  async geocode(text: string, options: GeocodeOptions = {}): Promise<GeocodeResponse> {
    const body: Record<string, unknown> = { text };
    if (options.topK !== undefined) body["top_k"] = options.topK;
    if (options.beamWidth !== undefined) body["beam_width"] = options.beamWidth;
    const response = await this.fetchImpl(`${this.base}/v1/geocode`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return parseOrThrow<GeocodeResponse>(response);
  }

  async leaves(bbox?: Bbox): Promise<LeafCollection> {
    const query = bbox ? `?bbox=${bbox.join(",")}` : "";
    const response = await this.fetchImpl(`${this.base}/v1/partition/leaves${query}`);
    return parseOrThrow<LeafCollection>(response);
  }

  async health(): Promise<HealthResponse> {
    const response = await this.fetchImpl(`${this.base}/v1/health`);
    return parseOrThrow<HealthResponse>(response);
  }
}
