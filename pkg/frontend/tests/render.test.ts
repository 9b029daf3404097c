import { describe, expect, it } from "vitest";
import { pieceStyle, trajectoryColor } from "../src/render";

describe("path piece styling", () => {
  it("bridges render white and dashed, distinct from trajectory spans", () => {
    const bridge = pieceStyle("bridge");
    const traj = pieceStyle("trajectory");
    expect(bridge.stroke).toBe("#ffffff");
    expect(bridge.dash.length).toBeGreaterThan(0);
    expect(traj.dash).toHaveLength(0);
    expect(bridge.stroke).not.toBe(traj.stroke);
  });
});

describe("trajectory palette", () => {
  it("is stable per id", () => {
    expect(trajectoryColor(12)).toBe(trajectoryColor(12));
  });

  it("separates nearby ids", () => {
    const colors = new Set([0, 1, 2, 3, 4, 5, 6, 7].map(trajectoryColor));
    expect(colors.size).toBe(8);
  });
});
