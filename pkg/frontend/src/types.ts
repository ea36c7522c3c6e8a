/** Payload shapes of the planner service API. */

export interface UtteranceView {
  speaker: "System" | "User";
  text: string;
  turn_index: number;
  act: string | null;
}

export interface SearchStatsView {
  playouts_executed: number;
  best_score: number;
  best_sequence: string[];
  iterations_per_level: number[];
  early_stopped_per_level: boolean[];
}

export interface PlannerParams {
  level: number;
  iterations: number;
  [key: string]: unknown;
}

export interface CreateSessionResponse {
  session_id: string;
  scenario_id: string;
  dataset: string;
  max_turns: number;
  params: PlannerParams;
  opening: UtteranceView[];
}

export interface TurnResponse {
  chosen_act: string | null;
  act_label: string | null;
  system_reply: string | null;
  stats: SearchStatsView | null;
  terminal: boolean;
  status: string;
  reward: number | null;
  turn_count: number;
  duplicate?: boolean;
}

export interface SessionDetail {
  session_id: string;
  scenario_id: string;
  dataset: string;
  status: string;
  terminal: boolean;
  reward: number | null;
  turn_count: number;
  max_turns: number;
  params: PlannerParams;
  transcript: UtteranceView[];
  stats: SearchStatsView[];
}

export interface StatsResponse {
  session_id: string;
  per_turn: SearchStatsView[];
  in_flight: boolean;
}
