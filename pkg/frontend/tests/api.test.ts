import { afterEach, describe, expect, it, vi } from "vitest";
import { ApiError, TubetrackClient } from "../src/api";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("TubetrackClient", () => {
  it("posts demo session requests with config", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse({
      session_id: "s1", width: 10, height: 10, n_trajectories: 0,
      trajectories: [], has_gt: true, config: {},
    }));
    vi.stubGlobal("fetch", fetchMock);
    const client = new TubetrackClient("http://api");
    const summary = await client.createDemoSession("spiral",
      { threshold_quantile: 0.9 }, { rngSeed: 5 });
    expect(summary.session_id).toBe("s1");
    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("http://api/sessions");
    const body = JSON.parse((init as RequestInit).body as string);
    expect(body.demo).toBe("spiral");
    expect(body.rng_seed).toBe(5);
    expect(body.config.threshold_quantile).toBe(0.9);
  });

  it("sends track requests and parses reports", async () => {
    const report = {
      metric: "fsr",
      path: { nodes: [1], polyline: [[0, 0]], pieces: [] },
      nodes: [1], edge_weights: [],
      seconds: { attach: 0, dijkstra: 0, total: 0 },
      j_score: 0.99,
    };
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse(report));
    vi.stubGlobal("fetch", fetchMock);
    const client = new TubetrackClient("");
    const got = await client.track("sid", [[1, 2], [3, 4]], "fe");
    expect(got.j_score).toBe(0.99);
    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("/sessions/sid/track");
    const body = JSON.parse((init as RequestInit).body as string);
    expect(body.points).toEqual([[1, 2], [3, 4]]);
    expect(body.metric).toBe("fe");
  });

  it("forwards the abort signal", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse({
      metric: "fsr", path: { nodes: [], polyline: [], pieces: [] },
      nodes: [], edge_weights: [], seconds: { attach: 0, dijkstra: 0, total: 0 },
    }));
    vi.stubGlobal("fetch", fetchMock);
    const controller = new AbortController();
    await new TubetrackClient("").track("sid", [[0, 0], [1, 1]], "fsr",
                                        controller.signal);
    const init = fetchMock.mock.calls[0][1] as RequestInit;
    expect(init.signal).toBe(controller.signal);
  });

  it("raises ApiError with no-route details", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse(
      { error: "NoRouteError", detail: "no route", component_size: 4,
        nearest_trajectories: [2, 7] }, 422));
    vi.stubGlobal("fetch", fetchMock);
    const client = new TubetrackClient("");
    const err = await client.track("sid", [[0, 0], [1, 1]], "fsr")
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).componentSize).toBe(4);
    expect((err as ApiError).nearestTrajectories).toEqual([2, 7]);
  });

  it("builds image urls from the session id", () => {
    expect(new TubetrackClient("http://h").imageUrl("abc"))
      .toBe("http://h/sessions/abc/image");
  });
});
