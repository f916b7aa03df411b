import type { PredictResponse } from "./types.js";

/** HTML-string renderers, kept pure so tests can assert on the markup
 * that gets mounted.
 */

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function displayName(key: string, names: Map<string, string>): string {
  return names.get(key) ?? key;
}

/** Sorted probability bars, highest first. */
export function renderBars(
  probabilities: Record<string, number>,
  names: Map<string, string>,
): string {
  const entries = Object.entries(probabilities).sort((a, b) => b[1] - a[1]);
  return entries
    .map(([key, p]) => {
      const pct = Math.round(p * 100);
      return (
        `<div class="bar-row" data-label="${esc(key)}">` +
        `<span class="bar-name">${esc(displayName(key, names))}</span>` +
        `<span class="bar-track"><span class="bar-fill" style="width:${pct}%"></span></span>` +
        `<span class="bar-pct">${pct}%</span>` +
        `</div>`
      );
    })
    .join("");
}

export function renderResult(
  response: PredictResponse,
  names: Map<string, string>,
): string {
  const label = esc(displayName(response.label, names));
  const candidates = Object.keys(response.probabilities).length;
  const badge =
    response.group === null
      ? `<span class="badge">all ${candidates} classes</span>`
      : `<span class="badge">group ${response.group} (${candidates} candidates)</span>`;
  return (
    `<div class="headline">${label}</div>` +
    badge +
    `<div class="bars">${renderBars(response.probabilities, names)}</div>`
  );
}

export function renderError(message: string): string {
  return `<div class="error">${esc(message)}</div>`;
}

export function renderCounter(count: number): string {
  return count === 1 ? "1 stroke" : `${count} strokes`;
}
