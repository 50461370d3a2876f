// Console contract tests against a scripted API stub: the console renders
// exactly what the server reports and never computes safety itself.

import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api";
import {
  ConsoleApp,
  renderGoalLineMarkers,
  renderOutcomeBadge,
  renderVerdictCard,
} from "../src/app";
import { ProposeResponse, TrajectoryResponse, WorldResponse } from "../src/types";

const WORLD: WorldResponse = {
  world: {
    v: 1.0,
    omega_bounds: [-2, 2],
    dt: 0.1,
    bounds: { xmin: -3, xmax: 3, ymin: -4, ymax: 4 },
    walls: [
      { xmin: 0.4, xmax: 0.8, ymin: -4, ymax: -0.5 },
      { xmin: 0.4, xmax: 0.8, ymin: 0.5, ymax: 4 },
    ],
    goal_line_x: 3.0,
    goal_y_range: [-3, 3],
    target_eps: 0.5,
    max_steps: 400,
  },
  catalog: [{ id: 0, name: "Red Mug", gy: -3.0 }],
  artifact_set_id: "stubset",
};

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

type Script = Record<string, (init?: RequestInit) => Response>;

function scriptedClient(script: Script, calls: string[] = []): ApiClient {
  const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
    const path = url.replace("http://stub", "");
    calls.push(`${init?.method ?? "GET"} ${path}`);
    const entries = Object.entries(script).sort((a, b) => b[0].length - a[0].length);
    for (const [key, handler] of entries) {
      if (path.startsWith(key)) {
        return handler(init);
      }
    }
    return jsonResponse(404, { detail: `unscripted path ${path}` });
  };
  return new ApiClient("http://stub", fetchImpl);
}

const SLICE = {
  phi: 0,
  gy: 0,
  grid: "value",
  xs: [-1, 0, 1],
  ys: [0, 1],
  values: [
    [-1, -0.5],
    [0.2, 0.4],
    [1, 1.5],
  ],
  artifact_set_id: "stubset",
};

const BASE_SCRIPT: Script = {
  "/world": () => jsonResponse(200, WORLD),
  "/value-slice": () => jsonResponse(200, SLICE),
  "/sessions": () =>
    jsonResponse(201, {
      session_id: "s1",
      state: { x: -2, y: 0, phi: 0 },
      artifact_set_id: "stubset",
    }),
};

function safeProposal(gy: number): ProposeResponse {
  return {
    outcome: "original_safe",
    goal: { gy },
    value: -0.42,
    distance: 0,
    attempts: 0,
    sigma2_ladder: [],
    trace: [],
    seed: 7,
    artifact_set_id: "stubset",
    state: { x: -2, y: 0, phi: 0 },
  };
}

function alternativeProposal(gy: number): ProposeResponse {
  return {
    outcome: "alternative",
    goal: { gy },
    value: -0.11,
    distance: 0.9,
    attempts: 100,
    sigma2_ladder: [0.1],
    trace: [[{ gy, value: -0.11, feasible: true }, { gy: 2.9, value: 0.8, feasible: false }]],
    seed: 8,
    artifact_set_id: "stubset",
    state: { x: -2, y: 0, phi: 0 },
  };
}

async function connectedApp(script: Script, calls: string[] = []): Promise<ConsoleApp> {
  const app = new ConsoleApp(scriptedClient(script, calls));
  await app.connect();
  return app;
}

describe("safe goal click", () => {
  it("renders a safe verdict with no alternative card", async () => {
    const app = await connectedApp({
      ...BASE_SCRIPT,
      "/sessions/s1/propose": () => jsonResponse(200, safeProposal(1.5)),
    });
    await app.clickGoal(1.5);
    const card = renderVerdictCard(app.state);
    expect(card).toContain("badge safe");
    expect(card).not.toContain("alternative");
    expect(card).not.toContain("accept alternative");
    expect(renderGoalLineMarkers(app.state)).not.toContain("alternative");
  });
});

describe("unsafe goal click", () => {
  it("renders the alternative card with the server-reported goal", async () => {
    const app = await connectedApp({
      ...BASE_SCRIPT,
      "/sessions/s1/propose": () => jsonResponse(200, alternativeProposal(1.25)),
    });
    await app.clickGoal(2.9);
    const card = renderVerdictCard(app.state);
    expect(card).toContain("badge unsafe");
    expect(card).toContain("accept alternative");
    expect(card).toContain("1.250"); // the server's g_r, not the click position
    // the goal-line marker sits at the server-reported alternative
    const markers = renderGoalLineMarkers(app.state);
    expect(markers).toContain('class="alternative"');
    expect(markers).toContain('data-gy="1.25"');
    // per-candidate V values from the trace are listed
    expect(card).toContain("feasible");
    expect(card).toContain("infeasible");
  });

  it("renders no-safe-alternative as a dead end", async () => {
    const noSafe: ProposeResponse = {
      ...alternativeProposal(0),
      outcome: "no_safe_alternative",
      goal: null,
      value: null,
      distance: null,
    };
    const app = await connectedApp({
      ...BASE_SCRIPT,
      "/sessions/s1/propose": () => jsonResponse(200, noSafe),
    });
    await app.clickGoal(2.9);
    const card = renderVerdictCard(app.state);
    expect(card).toContain("no safe alternative");
    expect(card).not.toContain("accept alternative");
  });
});

describe("accept", () => {
  const traj: TrajectoryResponse = {
    states: [
      [-2, 0, 0],
      [-1.9, 0, 0],
      [-1.8, 0, 0],
    ],
    actions: [0, 0],
    margins: [
      [5, -1],
      [4, -1],
      [-0.1, -1],
    ],
    outcome: "success",
    artifact_set_id: "stubset",
    state: { x: -1.8, y: 0, phi: 0 },
  };

  it("renders the server trajectory's outcome badge after playback", async () => {
    const calls: string[] = [];
    const app = await connectedApp(
      {
        ...BASE_SCRIPT,
        "/sessions/s1/propose": () => jsonResponse(200, alternativeProposal(1.0)),
        "/sessions/s1/accept": () => jsonResponse(200, traj),
      },
      calls,
    );
    await app.clickGoal(2.9);
    await app.accept();
    expect(app.state.trajectory?.outcome).toBe("success");
    // during playback: running badge; after: the server outcome verbatim
    expect(renderOutcomeBadge(app.state)).toContain("running");
    while (app.tickPlayback()) { /* play to the end */ }
    const badge = renderOutcomeBadge(app.state);
    expect(badge).toContain("outcome success");
    expect(app.state.robot).toEqual({ x: -1.8, y: 0, phi: 0 });
    // exactly one accept call went out
    expect(calls.filter((c) => c.includes("/accept")).length).toBe(1);
  });

  it("sends the server's alternative goal back on accept", async () => {
    let acceptedBody: any = null;
    const app = await connectedApp({
      ...BASE_SCRIPT,
      "/sessions/s1/propose": () => jsonResponse(200, alternativeProposal(1.25)),
      "/sessions/s1/accept": (init) => {
        acceptedBody = JSON.parse(String(init?.body));
        return jsonResponse(200, traj);
      },
    });
    await app.clickGoal(2.9);
    await app.accept();
    expect(acceptedBody.goal.gy).toBe(1.25);
  });

  it("renders 409 conflicts inline instead of crashing", async () => {
    const app = await connectedApp({
      ...BASE_SCRIPT,
      "/sessions/s1/propose": () => jsonResponse(200, alternativeProposal(1.0)),
      "/sessions/s1/accept": () =>
        jsonResponse(409, { detail: "goal does not match the pending decision" }),
    });
    await app.clickGoal(2.9);
    await app.accept();
    expect(app.state.inlineError).toContain("does not match");
    expect(app.state.banner).toBeNull();
  });
});

describe("reject", () => {
  it("clears the proposal so a fresh propose can follow", async () => {
    const app = await connectedApp({
      ...BASE_SCRIPT,
      "/sessions/s1/propose": () => jsonResponse(200, alternativeProposal(1.0)),
    });
    await app.clickGoal(2.9);
    expect(app.state.proposal).not.toBeNull();
    app.reject();
    expect(app.state.proposal).toBeNull();
    expect(renderVerdictCard(app.state)).toContain("click a goal");
  });
});

describe("connection loss", () => {
  it("raises the retry banner on transport failure", async () => {
    const app = new ConsoleApp(
      new ApiClient("http://stub", async () => {
        throw new Error("ECONNREFUSED");
      }),
    );
    await app.connect();
    expect(app.state.banner).toContain("connection lost");
  });

  it("maps API errors with status codes", async () => {
    const client = scriptedClient({ "/world": () => jsonResponse(503, { detail: "artifacts not loaded" }) });
    await expect(client.getWorld()).rejects.toThrowError(ApiError);
  });
});

describe("session recovery", () => {
  it("restores state and pending proposal from the session record", async () => {
    const app = new ConsoleApp(
      scriptedClient({
        ...BASE_SCRIPT,
        "/sessions/s9": () =>
          jsonResponse(200, {
            session_id: "s9",
            state: { x: 1, y: 2, phi: 0.5 },
            pending: alternativeProposal(0.75),
            history: [{ goal: { gy: -1 }, outcome: "success", steps: 42 }],
            artifact_set_id: "stubset",
          }),
      }),
    );
    await app.recover("s9");
    expect(app.state.robot).toEqual({ x: 1, y: 2, phi: 0.5 });
    expect(app.state.proposal?.goal?.gy).toBe(0.75);
    expect(renderVerdictCard(app.state)).toContain("accept alternative");
  });
});
