// Pure view-state transitions for the interactive loop. The reducer style
// keeps the tracking workflow (seed order, undo, layer toggles, one
// in-flight request) testable without a DOM.

import type { TrackedPathDto } from "./api";

export type Metric = "fsr" | "fe" | "angle";

export type LayerName = "image" | "trajectories" | "heatmap" | "path" | "seeds";

export interface UiState {
  sessionId: string | null;
  seeds: [number, number][];
  layers: Record<LayerName, boolean>;
  metric: Metric;
  autoTrack: boolean;
  path: TrackedPathDto | null;
  jScore: number | null;
  inFlight: boolean;
  message: string | null;
  highlightedTrajectories: number[];
}

export const initialState: UiState = {
  sessionId: null,
  seeds: [],
  layers: { image: true, trajectories: true, heatmap: false, path: true, seeds: true },
  metric: "fsr",
  autoTrack: true,
  path: null,
  jScore: null,
  inFlight: false,
  message: null,
  highlightedTrajectories: [],
};

export interface Transition {
  state: UiState;
  shouldTrack: boolean;
}

export function sessionLoaded(state: UiState, sessionId: string): UiState {
  // fresh session: seeds and path reset, layer preferences survive
  return {
    ...state,
    sessionId,
    seeds: [],
    path: null,
    jScore: null,
    message: null,
    highlightedTrajectories: [],
  };
}

export function placeSeed(
  state: UiState,
  x: number,
  y: number,
  width: number,
  height: number,
): Transition {
  if (x < 0 || y < 0 || x >= width || y >= height) {
    return {
      state: { ...state, message: "Click outside the image was ignored" },
      shouldTrack: false,
    };
  }
  const seeds: [number, number][] = [...state.seeds, [x, y]];
  return {
    state: { ...state, seeds, message: null },
    shouldTrack: state.autoTrack && seeds.length >= 2,
  };
}

export function undoSeed(state: UiState): Transition {
  if (state.seeds.length === 0) {
    return { state, shouldTrack: false };
  }
  const seeds = state.seeds.slice(0, -1);
  return {
    state: {
      ...state,
      seeds,
      path: seeds.length >= 2 ? state.path : null,
      jScore: seeds.length >= 2 ? state.jScore : null,
    },
    shouldTrack: state.autoTrack && seeds.length >= 2,
  };
}

export function clearSeeds(state: UiState): UiState {
  return { ...state, seeds: [], path: null, jScore: null, highlightedTrajectories: [] };
}

export function toggleLayer(state: UiState, layer: LayerName): UiState {
  return { ...state, layers: { ...state.layers, [layer]: !state.layers[layer] } };
}

export function setMetric(state: UiState, metric: Metric): Transition {
  // switching metric keeps layers and seeds; a placed pair re-tracks
  return {
    state: { ...state, metric },
    shouldTrack: state.autoTrack && state.seeds.length >= 2,
  };
}

export function setAutoTrack(state: UiState, enabled: boolean): UiState {
  return { ...state, autoTrack: enabled };
}

export function trackStarted(state: UiState): UiState {
  return { ...state, inFlight: true, message: null, highlightedTrajectories: [] };
}

export function trackSucceeded(
  state: UiState,
  path: TrackedPathDto,
  jScore: number | null,
): UiState {
  return { ...state, inFlight: false, path, jScore, message: null };
}

export function trackFailed(
  state: UiState,
  message: string,
  highlightedTrajectories: number[] = [],
): UiState {
  return { ...state, inFlight: false, message, highlightedTrajectories };
}
