// Annotation drafts: click collection, validation and submission payloads.

import { previewError } from "./geometry.js";
import type { ConstraintKind } from "./protocol.js";

// Total clicks per kind; the first `fixed` clicks form the gripper side
// (fixed in the image), the rest the world-anchored target side.
export const CLICK_LAYOUT: Record<ConstraintKind, { fixed: number; anchored: number }> = {
  p2p: { fixed: 1, anchored: 1 },
  p2l: { fixed: 1, anchored: 2 },
  l2l: { fixed: 2, anchored: 2 },
  par: { fixed: 2, anchored: 2 },
};

export function clicksNeeded(kind: ConstraintKind): number {
  const layout = CLICK_LAYOUT[kind];
  return layout.fixed + layout.anchored;
}

export interface AnnotationDraft {
  kind: ConstraintKind;
  clicks: Array<[number, number]>;
}

export type DraftCheck = { ok: true } | { ok: false; message: string };

export function validateDraft(draft: AnnotationDraft): DraftCheck {
  const needed = clicksNeeded(draft.kind);
  if (draft.clicks.length !== needed) {
    return {
      ok: false,
      message: `${draft.kind} needs ${needed} clicks, have ${draft.clicks.length}`,
    };
  }
  for (const [x, y] of draft.clicks) {
    if (!Number.isFinite(x) || !Number.isFinite(y)) {
      return { ok: false, message: "clicks must be finite pixel coordinates" };
    }
  }
  return { ok: true };
}

// Local error preview; must match the server's error vector to 1e-6.
export function draftPreview(draft: AnnotationDraft): number[] {
  const check = validateDraft(draft);
  if (!check.ok) {
    throw new Error(check.message);
  }
  return previewError(draft.kind, draft.clicks);
}

export function draftPayload(draft: AnnotationDraft): { kind: ConstraintKind; points: number[][] } {
  return {
    kind: draft.kind,
    points: draft.clicks.map(([x, y]) => [x, y]),
  };
}
