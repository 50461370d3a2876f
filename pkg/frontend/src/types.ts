// Wire types mirroring the service's JSON schemas. Angles radians, distances
// meters, numbers IEEE doubles.

export interface RectDto {
  xmin: number;
  xmax: number;
  ymin: number;
  ymax: number;
}

export interface WorldDto {
  v: number;
  omega_bounds: [number, number];
  dt: number;
  bounds: RectDto;
  walls: RectDto[];
  goal_line_x: number;
  goal_y_range: [number, number];
  target_eps: number;
  max_steps: number;
}

export interface CatalogEntryDto {
  id: number;
  name: string;
  gy: number;
}

export interface WorldResponse {
  world: WorldDto;
  catalog: CatalogEntryDto[];
  artifact_set_id: string;
}

export interface ValueSliceResponse {
  phi: number;
  gy: number;
  grid: string;
  xs: number[];
  ys: number[];
  values: number[][]; // values[i][j] = V(xs[i], ys[j])
  artifact_set_id: string;
}

export interface GoalDto {
  gy?: number;
  id?: number;
  name?: string;
}

export interface SessionResponse {
  session_id: string;
  state: { x: number; y: number; phi: number };
  artifact_set_id: string;
}

export interface SampleEvalDto {
  gy: number;
  value: number;
  feasible: boolean;
}

export interface ProposeResponse {
  outcome: "original_safe" | "alternative" | "no_safe_alternative";
  goal: GoalDto | null;
  value: number | null;
  distance: number | null;
  attempts: number;
  sigma2_ladder: number[];
  trace: SampleEvalDto[][];
  seed: number;
  artifact_set_id: string;
  state: { x: number; y: number; phi: number };
}

export interface TrajectoryResponse {
  states: [number, number, number][];
  actions: number[];
  margins: [number, number][];
  outcome: "success" | "failure" | "timeout";
  artifact_set_id: string;
  state: { x: number; y: number; phi: number };
}

export interface SessionInfoResponse {
  session_id: string;
  state: { x: number; y: number; phi: number };
  pending: ProposeResponse | null;
  history: { goal: GoalDto | null; outcome: string; steps: number }[];
  artifact_set_id: string;
}
