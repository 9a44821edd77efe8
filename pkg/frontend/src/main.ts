/** DOM wiring for the demo page: pick a video, describe the music you want,
 * inspect the ranked list, refine, resubmit. */

import { ApiError, ServiceClient } from "./api.js";
import { applyError, applyResults, beginSubmit, initialState } from "./state.js";
import { renderError, renderResults, renderVideoOptions } from "./render.js";

declare global {
  interface Window {
    VIML_API_BASE?: string;
  }
}

const client = new ServiceClient(window.VIML_API_BASE ?? "");
const state = initialState();

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function redraw(): void {
  const resultsBox = el<HTMLDivElement>("results");
  const status = el<HTMLSpanElement>("status");
  status.textContent = state.pending ? "searching..." : "";
  let html = "";
  if (state.error) html += renderError(state.error);
  if (state.results) html += renderResults(state.results);
  resultsBox.innerHTML = html;
}

async function submit(): Promise<void> {
  state.videoId = el<HTMLSelectElement>("video").value || null;
  state.text = el<HTMLInputElement>("text").value;
  state.topK = Number(el<HTMLInputElement>("topk").value) || 10;
  const token = beginSubmit(state);
  redraw();
  if (!token) return;
  try {
    const results = await client.query({
      video_id: token.videoId,
      text: token.text,
      top_k: token.topK,
    });
    applyResults(state, token, results);
  } catch (err) {
    const message =
      err instanceof ApiError ? err.message : "service unreachable";
    applyError(state, token, message);
  }
  redraw();
}

async function boot(): Promise<void> {
  try {
    const videos = await client.videos();
    el<HTMLSelectElement>("video").innerHTML = renderVideoOptions(videos, null);
  } catch {
    el<HTMLDivElement>("results").innerHTML = renderError(
      "could not load video list; is the service running?",
    );
    return;
  }
  el<HTMLFormElement>("query-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });
}

void boot();
