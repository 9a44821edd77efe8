/** Pure HTML-string renderers (no ranking logic lives here: rows appear
 * exactly in the order the service returned them). */

import type { QueryResult } from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function formatScore(score: number): string {
  return score.toFixed(3);
}

export function renderResults(results: QueryResult[]): string {
  if (results.length === 0) {
    return '<p class="empty">no results</p>';
  }
  const rows = results
    .map(
      (r, i) =>
        `<tr class="result-row"><td class="rank">${i + 1}</td>` +
        `<td class="track">${escapeHtml(r.track_id)}</td>` +
        `<td class="score">${formatScore(r.score)}</td></tr>`,
    )
    .join("");
  return (
    '<table class="results"><thead><tr><th>#</th><th>track</th><th>score</th></tr></thead>' +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderError(message: string): string {
  return `<p class="error">${escapeHtml(message)}</p>`;
}

export function renderVideoOptions(videoIds: string[], selected: string | null): string {
  return videoIds
    .map((id) => {
      const sel = id === selected ? " selected" : "";
      return `<option value="${escapeHtml(id)}"${sel}>${escapeHtml(id)}</option>`;
    })
    .join("");
}

export function countResultRows(html: string): number {
  return (html.match(/class="result-row"/g) ?? []).length;
}
