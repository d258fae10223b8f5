/** Browser bootstrap: endpoint URL comes from ?api=, else localhost. */

import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://localhost:8000";
const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}
createApp(root, new ApiClient(baseUrl));
