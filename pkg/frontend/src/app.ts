// Console view state and transitions. Rendering is a pure function of
// ViewState plus the last server responses; every user action maps to exactly
// one API call. The console never computes safety itself: verdicts, values,
// and outcomes shown to the operator are always server-attributed.

import { ApiClient, ApiError } from "./api";
import {
  GoalDto,
  ProposeResponse,
  TrajectoryResponse,
  ValueSliceResponse,
  WorldResponse,
} from "./types";

export interface ViewState {
  sessionId: string | null;
  world: WorldResponse | null;
  slicePhi: number;
  sliceGy: number;
  slice: ValueSliceResponse | null;
  measure: string;
  intent: string | null;
  robot: { x: number; y: number; phi: number } | null;
  proposal: ProposeResponse | null;
  trajectory: TrajectoryResponse | null;
  playbackCursor: number; // index into trajectory.states during playback
  banner: string | null; // connection-loss banner text
  inlineError: string | null; // 409/422 detail rendered next to the controls
  busy: boolean;
}

export function initialViewState(): ViewState {
  return {
    sessionId: null,
    world: null,
    slicePhi: 0,
    sliceGy: 0,
    slice: null,
    measure: "euclid",
    intent: null,
    robot: null,
    proposal: null,
    trajectory: null,
    playbackCursor: 0,
    banner: null,
    inlineError: null,
    busy: false,
  };
}

export class ConsoleApp {
  state: ViewState = initialViewState();
  private inflight = new Set<string>(); // per-action de-duplication

  constructor(
    private api: ApiClient,
    private onChange: (s: ViewState) => void = () => {},
  ) {}

  private update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  private async guarded<T>(key: string, call: () => Promise<T>): Promise<T | null> {
    if (this.inflight.has(key)) {
      return null; // an identical action is already in flight
    }
    this.inflight.add(key);
    this.update({ busy: true, inlineError: null });
    try {
      const result = await call();
      this.update({ banner: null });
      return result;
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.status === 422)) {
        this.update({ inlineError: err.detail });
      } else {
        this.update({ banner: `connection lost — ${String(err)} (retry)` });
      }
      return null;
    } finally {
      this.inflight.delete(key);
      this.update({ busy: false });
    }
  }

  async connect(): Promise<void> {
    const world = await this.guarded("connect", () => this.api.getWorld());
    if (!world) return;
    const session = await this.guarded("session", () => this.api.createSession());
    if (!session) return;
    this.update({ world, sessionId: session.session_id, robot: session.state });
    await this.refreshSlice();
  }

  // after a reload the console recovers from the server's session record
  async recover(sessionId: string): Promise<void> {
    const world = await this.guarded("connect", () => this.api.getWorld());
    if (!world) return;
    const info = await this.guarded("recover", () => this.api.getSession(sessionId));
    if (!info) return;
    this.update({
      world,
      sessionId: info.session_id,
      robot: info.state,
      proposal: info.pending,
    });
    await this.refreshSlice();
  }

  async refreshSlice(): Promise<void> {
    const slice = await this.guarded("slice", () =>
      this.api.getValueSlice(this.state.slicePhi, this.state.sliceGy),
    );
    if (slice) {
      this.update({ slice });
    }
  }

  async setSliceCoords(phi: number, gy: number): Promise<void> {
    this.update({ slicePhi: phi, sliceGy: gy });
    await this.refreshSlice();
  }

  setMeasure(measure: string, intent: string | null): void {
    this.update({ measure, intent });
  }

  // a click on the goal line proposes that goal
  async clickGoal(gy: number): Promise<void> {
    if (!this.state.sessionId) return;
    const proposal = await this.guarded("propose", () =>
      this.api.propose(this.state.sessionId!, { gy }, this.state.measure,
        this.state.intent ?? undefined),
    );
    if (proposal) {
      this.update({ proposal, trajectory: null, playbackCursor: 0 });
      await this.setSliceCoords(this.state.slicePhi, gy);
    }
  }

  async clickCatalogGoal(id: number): Promise<void> {
    if (!this.state.sessionId) return;
    const proposal = await this.guarded("propose", () =>
      this.api.propose(this.state.sessionId!, { id }, this.state.measure,
        this.state.intent ?? undefined),
    );
    if (proposal) {
      this.update({ proposal, trajectory: null, playbackCursor: 0 });
    }
  }

  // accept executes the goal the server proposed (original or alternative)
  async accept(): Promise<void> {
    const { proposal, sessionId } = this.state;
    if (!proposal || !proposal.goal || !sessionId) return;
    const traj = await this.guarded("accept", () =>
      this.api.accept(sessionId, proposal.goal!),
    );
    if (traj) {
      this.update({
        trajectory: traj,
        playbackCursor: 0,
        robot: traj.state,
        proposal: null,
      });
    }
  }

  // reject simply clears the card; the operator picks a fresh goal
  reject(): void {
    this.update({ proposal: null, inlineError: null });
  }

  // playback advances one simulator step (dt seconds of wall time per tick)
  tickPlayback(): boolean {
    const traj = this.state.trajectory;
    if (!traj) return false;
    if (this.state.playbackCursor >= traj.states.length - 1) return false;
    this.update({ playbackCursor: this.state.playbackCursor + 1 });
    return true;
  }
}

// --- renderers: pure ViewState -> HTML strings --------------------------------

function fmt(v: number | null | undefined, digits = 3): string {
  return v === null || v === undefined ? "--" : v.toFixed(digits);
}

export function renderVerdictCard(s: ViewState): string {
  const p = s.proposal;
  if (!p) {
    return `<div class="card idle">click a goal on the map to check it</div>`;
  }
  if (p.outcome === "original_safe") {
    return [
      `<div class="card verdict safe">`,
      `<span class="badge safe">safe</span>`,
      `<span>requested goal accepted as-is (V = ${fmt(p.value)} &le; 0)</span>`,
      `</div>`,
    ].join("");
  }
  if (p.outcome === "no_safe_alternative") {
    return [
      `<div class="card verdict nosafe">`,
      `<span class="badge unsafe">unsafe</span>`,
      `<span>no safe alternative found after ${p.attempts} candidates; `,
      `please pick a different goal</span>`,
      `</div>`,
    ].join("");
  }
  const g = p.goal!;
  const label = g.name !== undefined ? g.name : `gy = ${fmt(g.gy)}`;
  const candidates = (p.trace.length ? p.trace[p.trace.length - 1] : [])
    .map(
      (c) =>
        `<li class="${c.feasible ? "feasible" : "infeasible"}">` +
        `gy ${fmt(c.gy, 2)} &rarr; V ${fmt(c.value, 3)}</li>`,
    )
    .join("");
  return [
    `<div class="card verdict alternative">`,
    `<span class="badge unsafe">unsafe</span>`,
    `<span>requested goal fails the reach-avoid check; closest safe `,
    `alternative: <b class="alt-goal">${label}</b> `,
    `(V = ${fmt(p.value)}, distance ${fmt(p.distance)})</span>`,
    `<ul class="candidates">${candidates}</ul>`,
    `<button data-action="accept">accept alternative</button>`,
    `<button data-action="reject">reject</button>`,
    `</div>`,
  ].join("");
}

export function renderGoalLineMarkers(s: ViewState): string {
  // markers drawn on the goal line: the request and, when present, the
  // server's alternative at its reported position
  const p = s.proposal;
  if (!p) return "";
  const parts: string[] = [];
  if (p.outcome === "alternative" && p.goal && p.goal.gy !== undefined) {
    parts.push(`<marker class="alternative" data-gy="${p.goal.gy}"></marker>`);
  }
  if (p.outcome === "original_safe" && p.goal && p.goal.gy !== undefined) {
    parts.push(`<marker class="accepted" data-gy="${p.goal.gy}"></marker>`);
  }
  return parts.join("");
}

export function renderOutcomeBadge(s: ViewState): string {
  const t = s.trajectory;
  if (!t) return "";
  const done = s.playbackCursor >= t.states.length - 1;
  if (!done) {
    return `<span class="badge running">running (${s.playbackCursor}/${t.states.length - 1})</span>`;
  }
  return `<span class="badge outcome ${t.outcome}">${t.outcome}</span>`;
}

export function renderBanner(s: ViewState): string {
  return s.banner
    ? `<div class="banner error">${s.banner}</div>`
    : "";
}

export function renderInlineError(s: ViewState): string {
  return s.inlineError ? `<div class="inline-error">${s.inlineError}</div>` : "";
}
