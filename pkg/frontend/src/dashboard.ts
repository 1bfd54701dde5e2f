// Instructor analytics dashboard: per-student rows, drill-down timeline in
// server order, and the rubric entry form.

import { RUBRIC_DIMENSIONS, type RubricDimension, type WireEvent } from './types.js';

export interface TimelineRow {
  seq: number;
  ts: string;
  questionId: string | null;
  kind: string;
  label: string;
  text: string;
  sinceStartS: number | null; // null for the first event
  sincePrevS: number | null;
}

const KIND_LABELS: Record<string, string> = {
  initial_answer: 'Wrote initial answer',
  initial_answer_edit: 'Edited initial answer',
  ai_prompt: 'Ask Chat AI',
  ai_response: 'Chat AI answered',
  ai_comment: 'Commented on AI output',
  search_query: 'Searched the web',
  search_results: 'Search results',
  tool_error: 'Tool failed',
  focus_lost: 'Focus lost',
  focus_regained: 'Focus regained',
  revision: 'Reopened final answer',
  final_answer: 'Wrote final answer',
};

function eventText(event: WireEvent): string {
  const payload = event.payload as Record<string, any>;
  if (typeof payload.text === 'string') return payload.text;
  if (event.kind === 'search_results') {
    return (payload.results ?? [])
      .map((r: { rank: number; title: string }) => `${r.rank}. ${r.title}`)
      .join('\n');
  }
  if (event.kind === 'tool_error') return `${payload.error_code}: ${payload.message}`;
  if (event.kind === 'revision') return `supersedes #${payload.supersedes_seq}`;
  return '';
}

/**
 * The rendered timeline preserves the server's event order exactly; only
 * labels and durations are added.
 */
export function buildTimeline(events: WireEvent[]): TimelineRow[] {
  const start = events.length ? Date.parse(events[0].ts) : 0;
  let prev: number | null = null;
  return events.map((event) => {
    const at = Date.parse(event.ts);
    const row: TimelineRow = {
      seq: event.seq,
      ts: event.ts,
      questionId: event.question_id,
      kind: event.kind,
      label: KIND_LABELS[event.kind] ?? event.kind,
      text: eventText(event),
      sinceStartS: prev === null ? null : (at - start) / 1000,
      sincePrevS: prev === null ? null : (at - prev) / 1000,
    };
    prev = at;
    return row;
  });
}

/** Flag used by the row list: zero prompts means the student never used AI. */
export function noToolUse(indicators: { prompt_count: number; search_count: number }): boolean {
  return indicators.prompt_count === 0 && indicators.search_count === 0;
}

export interface RubricFormState {
  levels: Record<RubricDimension, number | null>;
  notes: string;
}

export function emptyRubricForm(): RubricFormState {
  return {
    levels: {
      understanding: null,
      reasoning: null,
      independence: null,
      improvement_over_time: null,
      recall_from_class_discussions: null,
    },
    notes: '',
  };
}

/** Levels are integers 0-4; everything else is an inline field error. */
export function rubricFormErrors(form: RubricFormState): Map<string, string> {
  const errors = new Map<string, string>();
  for (const dim of RUBRIC_DIMENSIONS) {
    const value = form.levels[dim];
    if (value === null || !Number.isInteger(value)) {
      errors.set(dim, 'a level from 0 to 4 is required');
    } else if (value < 0 || value > 4) {
      errors.set(dim, 'levels range from 0 to 4');
    }
  }
  return errors;
}

export function completedLevels(form: RubricFormState): Record<string, number> {
  const levels: Record<string, number> = {};
  for (const dim of RUBRIC_DIMENSIONS) {
    levels[dim] = form.levels[dim] as number;
  }
  return levels;
}
