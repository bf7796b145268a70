import { RagClient } from "./api.js";
import { createApp } from "./app.js";

// API base URL: ?api=… beats a build-time global, beats same-origin :8080.
function apiBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) return fromQuery;
  const injected = (window as { DOCRAG_API_URL?: string }).DOCRAG_API_URL;
  if (injected) return injected;
  return `${window.location.protocol}//${window.location.hostname}:8080`;
}

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
const app = createApp(new RagClient(apiBaseUrl()), root);
void app.refreshStatus();
