import { describe, expect, it } from "vitest";

import { formatDelta, formatFactors, formatScore, formatSnooze } from "../src/format.js";
import type { CardViewModel } from "../src/types.js";

function card(factors: { id: string; z: number }[]): CardViewModel {
  return {
    patientId: "p1",
    riskScore: 0.8712,
    deltaLastHour: -0.034,
    topFactors: factors,
    column: "under-observation",
    snoozeUntil: null,
    flipped: true,
  };
}

describe("formatting", () => {
  it("shows scores to two decimals", () => {
    expect(formatScore(0.8712)).toBe("0.87");
    expect(formatScore(0)).toBe("0.00");
  });

  it("signs the hourly delta", () => {
    expect(formatDelta(0.034)).toBe("+0.03");
    expect(formatDelta(-0.034)).toBe("-0.03");
    expect(formatDelta(0)).toBe("+0.00");
  });

  it("renders factors with (+)/(-) signs in payload order", () => {
    const lines = formatFactors(
      card([
        { id: "lactate", z: 2.41 },
        { id: "map", z: -1.93 },
      ]),
    );
    expect(lines).toEqual(["(+) lactate z=+2.41", "(-) map z=-1.93"]);
  });

  it("uses a placeholder when no factor dominates", () => {
    expect(formatFactors(card([]))).toEqual(["no dominant factors"]);
  });

  it("renders a snooze countdown from the server deadline", () => {
    const c = { ...card([]), snoozeUntil: 14 };
    expect(formatSnooze(c, 11)).toBe("snoozed until hour 14 (3h left)");
    expect(formatSnooze(c, 20)).toBe("snoozed until hour 14 (0h left)");
  });
});
