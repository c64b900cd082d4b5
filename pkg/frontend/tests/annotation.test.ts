import { describe, expect, it } from "vitest";

import {
  CLICK_LAYOUT,
  clicksNeeded,
  draftPayload,
  draftPreview,
  validateDraft,
} from "../src/annotation";

describe("annotation drafts", () => {
  it("requires the right click count per kind", () => {
    expect(clicksNeeded("p2p")).toBe(2);
    expect(clicksNeeded("p2l")).toBe(3);
    expect(clicksNeeded("l2l")).toBe(4);
    expect(clicksNeeded("par")).toBe(4);
  });

  it("accepts a complete p2p draft", () => {
    const check = validateDraft({ kind: "p2p", clicks: [[320, 384], [400, 300]] });
    expect(check.ok).toBe(true);
  });

  it("rejects wrong arity with a message", () => {
    const check = validateDraft({ kind: "p2p", clicks: [[1, 1], [2, 2], [3, 3]] });
    expect(check.ok).toBe(false);
    if (!check.ok) {
      expect(check.message).toContain("p2p needs 2 clicks");
    }
  });

  it("rejects non-finite clicks", () => {
    const check = validateDraft({ kind: "p2p", clicks: [[NaN, 1], [2, 2]] });
    expect(check.ok).toBe(false);
  });

  it("serializes exactly to the service schema", () => {
    const payload = draftPayload({ kind: "par", clicks: [[1, 2], [3, 4], [5, 6], [7, 8]] });
    expect(payload).toEqual({ kind: "par", points: [[1, 2], [3, 4], [5, 6], [7, 8]] });
  });

  it("preview rejects incomplete drafts", () => {
    expect(() => draftPreview({ kind: "l2l", clicks: [[1, 1]] })).toThrow();
  });

  it("fixed/anchored split matches the protocol", () => {
    expect(CLICK_LAYOUT.p2p).toEqual({ fixed: 1, anchored: 1 });
    expect(CLICK_LAYOUT.p2l).toEqual({ fixed: 1, anchored: 2 });
    expect(CLICK_LAYOUT.l2l).toEqual({ fixed: 2, anchored: 2 });
    expect(CLICK_LAYOUT.par).toEqual({ fixed: 2, anchored: 2 });
  });
});
