/** 10-bar histogram of a score distribution, rendered as an SVG string. */

import type { Distribution } from "./types";

export interface HistogramLayout {
  width: number;
  height: number;
  barGap: number;
  labelBand: number;
}

const DEFAULT_LAYOUT: HistogramLayout = { width: 340, height: 170, barGap: 4, labelBand: 22 };

/** Bar heights in pixels, proportional to the bin probabilities. */
export function barHeights(p: number[], plotHeight: number): number[] {
  const peak = Math.max(...p);
  if (!(peak > 0)) {
    return p.map(() => 0);
  }
  return p.map((v) => (v / peak) * plotHeight);
}

export function formatMoment(value: number): string {
  return value.toFixed(1);
}

export function renderHistogram(dist: Distribution, layout: HistogramLayout = DEFAULT_LAYOUT): string {
  const { width, height, barGap, labelBand } = layout;
  const plotHeight = height - labelBand;
  const barWidth = (width - barGap * 11) / 10;
  const heights = barHeights(dist.p, plotHeight);
  const bars = heights
    .map((h, i) => {
      const x = barGap + i * (barWidth + barGap);
      const y = plotHeight - h;
      return (
        `<rect class="bar" data-score="${i + 1}" x="${x.toFixed(1)}" y="${y.toFixed(1)}" ` +
        `width="${barWidth.toFixed(1)}" height="${h.toFixed(1)}"></rect>` +
        `<text class="tick" x="${(x + barWidth / 2).toFixed(1)}" y="${plotHeight + 14}" ` +
        `text-anchor="middle">${i + 1}</text>`
      );
    })
    .join("");
  const caption =
    `<text class="moments" x="${width - barGap}" y="${plotHeight + 14}" text-anchor="end">` +
    `mean ${formatMoment(dist.mean)} · std ${formatMoment(dist.std)} · ${dist.n_ballots} ballots</text>`;
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" role="img" aria-label="score histogram">` +
    bars +
    caption +
    `</svg>`
  );
}
