// Presentation helpers for card faces.

import type { CardViewModel } from "./types.js";

/** Risk score shown to two decimals, e.g. "0.87". */
export function formatScore(score: number): string {
  return score.toFixed(2);
}

/** Hourly delta with an explicit sign, e.g. "+0.03" / "-0.01". */
export function formatDelta(delta: number): string {
  const s = delta.toFixed(2);
  return delta >= 0 ? `+${s}` : s;
}

/**
 * Factor lines for the flipped card face: "(+) lactate z=+2.4".
 * The API already orders factors by |z| descending; that order is kept.
 */
export function formatFactors(card: CardViewModel): string[] {
  if (card.topFactors.length === 0) {
    return ["no dominant factors"];
  }
  return card.topFactors.map(({ id, z }) => {
    const sign = z >= 0 ? "(+)" : "(-)";
    const zs = z >= 0 ? `+${z.toFixed(2)}` : z.toFixed(2);
    return `${sign} ${id} z=${zs}`;
  });
}

/** Snooze countdown, e.g. "snoozed until hour 12 (3h left)". */
export function formatSnooze(card: CardViewModel, clockHour: number): string {
  if (card.snoozeUntil === null) return "";
  const left = Math.max(card.snoozeUntil - clockHour, 0);
  return `snoozed until hour ${card.snoozeUntil} (${left}h left)`;
}
