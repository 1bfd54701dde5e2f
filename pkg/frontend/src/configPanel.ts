// Instructor exam configuration panel: a draft model that serializes to the
// exam config document, local required-field checks, and mapping of server
// 422 violations back onto the offending fields.

import type { ApiError } from './api.js';

export const DIRECTIVE_KINDS = [
  'unrestricted',
  'no_final_answer',
  'flawed_explanation',
  'fake_theory',
  'custom',
] as const;

export type DirectiveKind = (typeof DIRECTIVE_KINDS)[number];

// Mirrors the backend's frozen defaults (docs/formats.md); shown as an
// editable prefill. The server computes the effective instruction either way.
export const DEFAULT_DIRECTIVE_TEXT: Record<DirectiveKind, string | null> = {
  unrestricted: null,
  no_final_answer:
    'You are assisting a student during an exam. Whatever the student asks, ' +
    'do not provide the final answer; guide the student through the reasoning steps. ' +
    'Never state, confirm, or strongly hint at the final result.',
  flawed_explanation:
    'You are assisting a student during an exam. When the student asks about the ' +
    'exam topic, generate plausible but incorrect explanations. Sound confident and ' +
    'coherent, and never reveal that the reasoning is flawed.',
  fake_theory: null, // instructor text required
  custom: null, // instructor text required
};

export function requiresInstructionText(kind: DirectiveKind): boolean {
  return kind === 'fake_theory' || kind === 'custom';
}

export interface ToolDraft {
  toolId: string;
  kind: 'chat_model' | 'search_engine';
  providerRef: string;
  displayName: string;
}

export interface PolicyDraft {
  toolId: string;
  enabled: boolean;
  directiveKind: DirectiveKind;
  instructionText: string;
}

export interface QuestionDraft {
  questionId: string;
  body: string;
  weight: number;
  instructorAnswer: string;
  policies: PolicyDraft[];
}

export interface ExamDraft {
  examId: string;
  title: string;
  opensAt: string;
  closesAt: string;
  tools: ToolDraft[];
  students: string[];
  authors: string[];
  questions: QuestionDraft[];
}

export function emptyDraft(): ExamDraft {
  return {
    examId: '',
    title: '',
    opensAt: '',
    closesAt: '',
    tools: [],
    students: [],
    authors: [],
    questions: [],
  };
}

/** Selecting a directive kind prefills the default text, still editable. */
export function directiveSelected(policy: PolicyDraft, kind: DirectiveKind): PolicyDraft {
  return {
    ...policy,
    directiveKind: kind,
    instructionText: DEFAULT_DIRECTIVE_TEXT[kind] ?? '',
  };
}

export function draftToConfig(draft: ExamDraft): Record<string, unknown> {
  return {
    exam_id: draft.examId,
    title: draft.title,
    opens_at: draft.opensAt,
    closes_at: draft.closesAt,
    tools: draft.tools.map((t) => ({
      tool_id: t.toolId,
      kind: t.kind,
      provider_ref: t.providerRef,
      display_name: t.displayName,
    })),
    students: draft.students,
    authors: draft.authors,
    questions: draft.questions.map((q) => ({
      question_id: q.questionId,
      body: q.body,
      weight: q.weight,
      instructor_answer: q.instructorAnswer || null,
      policies: q.policies.map((p) => ({
        tool_id: p.toolId,
        enabled: p.enabled,
        directive: {
          kind: p.directiveKind,
          instruction_text: p.instructionText || null,
        },
      })),
    })),
  };
}

export interface FieldError {
  path: string;
  message: string;
}

/** Checks the panel can run before a round trip; the server re-validates. */
export function validateDraftLocally(draft: ExamDraft): FieldError[] {
  const errors: FieldError[] = [];
  if (!draft.examId) errors.push({ path: 'exam_id', message: 'required' });
  if (!draft.title) errors.push({ path: 'title', message: 'required' });
  if (!draft.opensAt) errors.push({ path: 'opens_at', message: 'required' });
  if (!draft.closesAt) errors.push({ path: 'closes_at', message: 'required' });
  if (draft.opensAt && draft.closesAt && draft.closesAt <= draft.opensAt) {
    errors.push({ path: 'closes_at', message: 'must be after opens_at' });
  }
  if (draft.questions.length === 0) {
    errors.push({ path: 'questions', message: 'an exam needs at least one question' });
  }
  draft.questions.forEach((q, qi) => {
    if (!q.questionId) errors.push({ path: `questions[${qi}].question_id`, message: 'required' });
    if (!q.body) errors.push({ path: `questions[${qi}].body`, message: 'required' });
    if (q.weight < 0) errors.push({ path: `questions[${qi}].weight`, message: 'must be non-negative' });
    q.policies.forEach((p, pi) => {
      if (requiresInstructionText(p.directiveKind) && !p.instructionText) {
        errors.push({
          path: `questions[${qi}].policies[${pi}].directive.instruction_text`,
          message: `${p.directiveKind} requires instruction text`,
        });
      }
      if (!draft.tools.some((t) => t.toolId === p.toolId)) {
        errors.push({
          path: `questions[${qi}].policies[${pi}].tool_id`,
          message: 'references a tool missing from the registry',
        });
      }
    });
  });
  return errors;
}

/** Projects a server invalid_config error onto per-field messages. */
export function violationsByField(err: ApiError): Map<string, string> {
  const map = new Map<string, string>();
  for (const violation of err.violations ?? []) {
    map.set(violation.path, violation.message);
  }
  return map;
}
