// Input bindings, one table as the single source of truth: the help panel
// renders it and the tests check it against the documented control list.

import { BrushSize } from "./protocol.js";

export interface Binding {
  input: string;
  action: string;
}

export const KEY_BINDINGS: readonly Binding[] = [
  { input: "left-click on a voxel", action: "add voxels with the active brush" },
  { input: "left-drag on empty space", action: "rotate the camera" },
  { input: "right-click on a voxel", action: "remove voxels with the active brush" },
  { input: "right-drag on empty space", action: "pan the camera" },
  { input: "scroll wheel", action: "zoom in / out" },
  { input: "Q / W / E / R", action: "brush size 1 / 3 / 5 / 7" },
  { input: "1 - 8", action: "choose style" },
  { input: "Space", action: "switch between editing and viewing mode" },
];

const BRUSH_KEYS: Record<string, BrushSize> = {
  KeyQ: 1,
  KeyW: 3,
  KeyE: 5,
  KeyR: 7,
};

export function brushForKey(code: string): BrushSize | null {
  return BRUSH_KEYS[code] ?? null;
}

// top-row digits and the numeric keypad both select styles
export function styleForKey(code: string): number | null {
  const m = /^(?:Digit|Numpad)([1-8])$/.exec(code);
  return m ? Number(m[1]) - 1 : null;
}

export function isModeToggle(code: string): boolean {
  return code === "Space";
}
