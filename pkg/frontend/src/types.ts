// Wire types mirroring the HTTP API (docs/api.md in the backend repo).

export type EventKind =
  | 'initial_answer'
  | 'initial_answer_edit'
  | 'ai_prompt'
  | 'ai_response'
  | 'ai_comment'
  | 'search_query'
  | 'search_results'
  | 'tool_error'
  | 'focus_lost'
  | 'focus_regained'
  | 'revision'
  | 'final_answer';

export interface WireEvent {
  seq: number;
  ts: string; // RFC 3339 UTC, millisecond precision
  kind: EventKind;
  question_id: string | null;
  payload: Record<string, unknown>;
}

export type GateState = 'awaiting_initial' | 'exploring' | 'finalized';

export interface ToolInfo {
  tool_id: string;
  kind: 'chat_model' | 'search_engine';
  display_name: string;
}

export interface QuestionView {
  question_id: string;
  body: string;
  instructor_answer: string | null;
  state: GateState;
  tools: ToolInfo[];
}

export interface SessionView {
  session_id: string;
  access_token: string;
  exam: { exam_id: string; title: string; closes_at: string };
  questions: QuestionView[];
}

export interface TraceDocument {
  session_id: string;
  exam_id: string;
  student_id: string;
  events: WireEvent[];
}

export interface Indicators {
  prompt_count: number;
  search_count: number;
  mean_prompt_length: number;
  time_to_first_prompt_s: number | null;
  explore_duration_s: number | null;
  revision_count: number;
  comment_coverage: number;
  off_task_count: number;
  off_task_total_s: number;
}

export interface RubricRecord {
  levels: Record<string, number>;
  weights: number[];
  overall: number;
  band: 'low' | 'medium' | 'high';
  assessor_id: string;
  notes: string;
  scored_at: string;
  question_id?: string;
}

export interface AnalyticsRow {
  student_id: string;
  status: 'present' | 'absent';
  session_id: string | null;
  per_question: Record<string, Indicators>;
  off_task_count: number;
  off_task_total_s: number;
  scores: RubricRecord[];
}

export interface ApiErrorBody {
  error: {
    code: string;
    message: string;
    violations?: { code: string; path: string; message: string }[];
  };
}

export const RUBRIC_DIMENSIONS = [
  'understanding',
  'reasoning',
  'independence',
  'improvement_over_time',
  'recall_from_class_discussions',
] as const;

export type RubricDimension = (typeof RUBRIC_DIMENSIONS)[number];
