// Student exam workspace state. Framework-free: the controller owns the
// view state and notifies a render callback; the DOM layer in main.ts is a
// thin projection of it. The server stays authoritative for every gate the
// controller enforces locally.

import { ApiError } from './api.js';
import type { GateState, SessionView, ToolInfo, TraceDocument, WireEvent } from './types.js';

/** The slice of the API client the workspace needs (ApiClient satisfies it). */
export interface StudentApi {
  submitInitial(sessionId: string, questionId: string, text: string): Promise<{ event: WireEvent }>;
  askAi(sessionId: string, questionId: string, toolId: string, prompt: string): Promise<{ events: WireEvent[] }>;
  runSearch(sessionId: string, questionId: string, toolId: string, query: string): Promise<{ events: WireEvent[] }>;
  comment(sessionId: string, questionId: string, responseSeq: number, text: string): Promise<{ event: WireEvent }>;
  submitFinal(sessionId: string, questionId: string, text: string): Promise<{ event: WireEvent }>;
  reportFocus(sessionId: string, kind: 'focus_lost' | 'focus_regained', activeQuestionId: string | null): Promise<{ event: WireEvent }>;
  trace(sessionId: string): Promise<TraceDocument>;
}

export interface ThreadEntry {
  promptSeq: number;
  prompt: string;
  toolId: string;
  responseSeq: number | null; // null when the attempt failed
  response: string | null;
  errorMessage: string | null;
  commentDraft: string;
  comments: string[];
  searchResults: { rank: number; title: string; snippet: string; url: string }[];
}

export interface QuestionWorkspace {
  questionId: string;
  body: string;
  instructorAnswer: string | null;
  gateState: GateState;
  tools: ToolInfo[];
  draftInitial: string;
  initialAnswer: string | null; // the committed one, shown beside the final editor
  draftPrompt: string;
  selectedTool: string | null;
  draftFinal: string;
  finalAnswer: string | null;
  thread: ThreadEntry[];
}

const BANNER_TEXT: Record<string, string> = {
  order_violation: 'Finish this step first: an initial answer is required before tools or a final answer.',
  exam_closed: 'The exam has closed; your work is preserved but can no longer change.',
  exam_not_open: 'The exam has not opened yet.',
  tool_disabled: 'That tool is not available for this question.',
  network_error: 'Connection lost; the request was retried safely. Try again.',
};

export function bannerText(err: unknown): string {
  if (err instanceof ApiError) {
    return BANNER_TEXT[err.code] ?? `${err.message} (${err.code})`;
  }
  return String(err);
}

export class WorkspaceController {
  readonly questions: QuestionWorkspace[];
  activeQuestion: string;
  banner: string | null = null;
  busy = false;
  private focusLost = false;

  constructor(
    private readonly api: StudentApi,
    readonly session: SessionView,
    private readonly onChange: () => void = () => {},
  ) {
    this.questions = session.questions.map((q) => ({
      questionId: q.question_id,
      body: q.body,
      instructorAnswer: q.instructor_answer,
      gateState: q.state,
      tools: q.tools, // server already excludes disabled tools
      draftInitial: '',
      initialAnswer: null,
      draftPrompt: '',
      selectedTool: q.tools.length ? q.tools[0].tool_id : null,
      draftFinal: '',
      finalAnswer: null,
      thread: [],
    }));
    this.activeQuestion = this.questions[0]?.questionId ?? '';
  }

  question(questionId: string = this.activeQuestion): QuestionWorkspace {
    const q = this.questions.find((entry) => entry.questionId === questionId);
    if (!q) throw new Error(`no question ${questionId}`);
    return q;
  }

  /** The tool panel is disabled, never hidden, until the initial answer posts. */
  toolPanelEnabled(questionId: string = this.activeQuestion): boolean {
    return this.question(questionId).gateState !== 'awaiting_initial';
  }

  finalEditorEnabled(questionId: string = this.activeQuestion): boolean {
    return this.question(questionId).gateState !== 'awaiting_initial';
  }

  /** Re-hydrate a question's thread from the server trace (page reload). */
  async loadHistory(): Promise<void> {
    const trace = await this.api.trace(this.session.session_id);
    for (const q of this.questions) {
      q.thread = [];
      q.initialAnswer = null;
      q.finalAnswer = null;
      for (const event of trace.events) {
        if (event.question_id === q.questionId) this.applyEvent(q, event);
      }
    }
    this.onChange();
  }

  private applyEvent(q: QuestionWorkspace, event: WireEvent): void {
    const payload = event.payload as Record<string, any>;
    switch (event.kind) {
      case 'initial_answer':
      case 'initial_answer_edit':
        q.initialAnswer = payload.text;
        break;
      case 'ai_prompt':
      case 'search_query':
        q.thread.push({
          promptSeq: event.seq,
          prompt: payload.text,
          toolId: payload.tool_id,
          responseSeq: null,
          response: null,
          errorMessage: null,
          commentDraft: '',
          comments: [],
          searchResults: [],
        });
        break;
      case 'ai_response': {
        const entry = q.thread.find((t) => t.promptSeq === payload.linked_seq);
        if (entry) {
          entry.responseSeq = event.seq;
          entry.response = payload.text;
        }
        break;
      }
      case 'search_results': {
        const entry = q.thread.find((t) => t.promptSeq === payload.linked_seq);
        if (entry) {
          entry.responseSeq = event.seq;
          entry.searchResults = payload.results;
        }
        break;
      }
      case 'tool_error': {
        const entry = q.thread.find((t) => t.promptSeq === payload.linked_seq);
        if (entry) entry.errorMessage = `${payload.error_code}: ${payload.message}`;
        break;
      }
      case 'ai_comment': {
        const entry = q.thread.find((t) => t.responseSeq === payload.linked_seq);
        if (entry) entry.comments.push(payload.text);
        break;
      }
      case 'final_answer':
        q.finalAnswer = payload.text;
        break;
      default:
        break; // focus events and revisions carry no workspace state
    }
  }

  private async guarded<T>(action: () => Promise<T>): Promise<T | null> {
    this.banner = null;
    this.busy = true;
    this.onChange();
    try {
      return await action();
    } catch (err) {
      this.banner = bannerText(err);
      return null;
    } finally {
      this.busy = false;
      this.onChange();
    }
  }

  async submitInitial(questionId: string = this.activeQuestion): Promise<boolean> {
    const q = this.question(questionId);
    const text = q.draftInitial;
    const result = await this.guarded(() =>
      this.api.submitInitial(this.session.session_id, questionId, text),
    );
    if (!result) return false;
    q.initialAnswer = text;
    q.gateState = 'exploring'; // unlocks the tool panel
    this.onChange();
    return true;
  }

  async askTool(questionId: string = this.activeQuestion): Promise<boolean> {
    const q = this.question(questionId);
    if (!q.selectedTool || !q.draftPrompt) return false;
    const tool = q.tools.find((t) => t.tool_id === q.selectedTool);
    const prompt = q.draftPrompt;
    const result = await this.guarded(() =>
      tool?.kind === 'search_engine'
        ? this.api.runSearch(this.session.session_id, questionId, tool.tool_id, prompt)
        : this.api.askAi(this.session.session_id, questionId, q.selectedTool!, prompt),
    );
    if (!result) return false;
    for (const event of result.events) this.applyEvent(q, event);
    q.draftPrompt = '';
    this.onChange();
    return true;
  }

  async submitComment(entry: ThreadEntry, questionId: string = this.activeQuestion): Promise<boolean> {
    if (entry.responseSeq === null || !entry.commentDraft) return false;
    const text = entry.commentDraft;
    const result = await this.guarded(() =>
      this.api.comment(this.session.session_id, questionId, entry.responseSeq!, text),
    );
    if (!result) return false;
    entry.comments.push(text);
    entry.commentDraft = '';
    this.onChange();
    return true;
  }

  async submitFinal(questionId: string = this.activeQuestion): Promise<boolean> {
    const q = this.question(questionId);
    const text = q.draftFinal;
    const result = await this.guarded(() =>
      this.api.submitFinal(this.session.session_id, questionId, text),
    );
    if (!result) return false;
    q.finalAnswer = text;
    q.gateState = 'finalized';
    this.onChange();
    return true;
  }

  /** Page-visibility hook: report focus loss/regain, never blocking the UI. */
  async handleVisibility(hidden: boolean): Promise<void> {
    if (hidden === this.focusLost) return;
    this.focusLost = hidden;
    try {
      await this.api.reportFocus(
        this.session.session_id,
        hidden ? 'focus_lost' : 'focus_regained',
        this.activeQuestion || null,
      );
    } catch {
      // focus telemetry is best-effort by design
    }
  }
}
