// Typed client for the exam service HTTP API. Every mutating call carries a
// generated X-Request-Id and retries idempotently on network failure, so a
// flaky connection can never double-log an event.

import type {
  AnalyticsRow,
  ApiErrorBody,
  RubricRecord,
  SessionView,
  TraceDocument,
  WireEvent,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly violations?: { code: string; path: string; message: string }[],
  ) {
    super(message);
  }
}

function requestId(): string {
  if (typeof crypto !== 'undefined' && 'randomUUID' in crypto) {
    return crypto.randomUUID();
  }
  return `req-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

export interface ApiClientOptions {
  baseUrl: string;
  token: string;
  fetchImpl?: typeof fetch;
  retries?: number;
}

export class ApiClient {
  private readonly baseUrl: string;
  private token: string;
  private readonly fetchImpl: typeof fetch;
  private readonly retries: number;

  constructor(options: ApiClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, '');
    this.token = options.token;
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
    this.retries = options.retries ?? 2;
  }

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(method: 'GET' | 'POST', path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {
      Authorization: `Bearer ${this.token}`,
    };
    if (body !== undefined) {
      headers['Content-Type'] = 'application/json';
    }
    if (method === 'POST') {
      headers['X-Request-Id'] = requestId(); // same id across retries
    }
    let lastNetworkError: unknown;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      let response: Response;
      try {
        response = await this.fetchImpl(`${this.baseUrl}${path}`, {
          method,
          headers,
          body: body === undefined ? undefined : JSON.stringify(body),
        });
      } catch (err) {
        lastNetworkError = err; // retry with the same request id
        continue;
      }
      if (!response.ok) {
        let parsed: ApiErrorBody | null = null;
        try {
          parsed = (await response.json()) as ApiErrorBody;
        } catch {
          // non-JSON error body; fall through to a generic error
        }
        throw new ApiError(
          response.status,
          parsed?.error.code ?? `http_${response.status}`,
          parsed?.error.message ?? response.statusText,
          parsed?.error.violations,
        );
      }
      return (await response.json()) as T;
    }
    throw new ApiError(0, 'network_error', String(lastNetworkError));
  }

  // -- instructor ----------------------------------------------------------

  createExam(config: unknown): Promise<{ exam_id: string }> {
    return this.request('POST', '/exams', config);
  }

  getExam(examId: string): Promise<Record<string, unknown>> {
    return this.request('GET', `/exams/${encodeURIComponent(examId)}`);
  }

  analytics(examId: string): Promise<{ exam_id: string; rows: AnalyticsRow[] }> {
    return this.request('GET', `/exams/${encodeURIComponent(examId)}/analytics`);
  }

  submitRubric(
    sessionId: string,
    questionId: string,
    levels: Record<string, number>,
    notes = '',
  ): Promise<{ score: RubricRecord }> {
    return this.request(
      'POST',
      `/sessions/${encodeURIComponent(sessionId)}/questions/${encodeURIComponent(questionId)}/rubric`,
      { levels, notes },
    );
  }

  // -- student ------------------------------------------------------------

  openSession(examId: string): Promise<SessionView> {
    return this.request('POST', `/exams/${encodeURIComponent(examId)}/sessions`);
  }

  submitInitial(sessionId: string, questionId: string, text: string): Promise<{ event: WireEvent }> {
    return this.request('POST', this.questionPath(sessionId, questionId, 'initial'), { text });
  }

  askAi(
    sessionId: string,
    questionId: string,
    toolId: string,
    prompt: string,
  ): Promise<{ events: WireEvent[] }> {
    return this.request('POST', this.questionPath(sessionId, questionId, 'ai'), {
      tool_id: toolId,
      prompt,
    });
  }

  runSearch(
    sessionId: string,
    questionId: string,
    toolId: string,
    query: string,
  ): Promise<{ events: WireEvent[] }> {
    return this.request('POST', this.questionPath(sessionId, questionId, 'search'), {
      tool_id: toolId,
      query,
    });
  }

  comment(
    sessionId: string,
    questionId: string,
    responseSeq: number,
    text: string,
  ): Promise<{ event: WireEvent }> {
    return this.request('POST', this.questionPath(sessionId, questionId, 'comment'), {
      response_seq: responseSeq,
      text,
    });
  }

  submitFinal(sessionId: string, questionId: string, text: string): Promise<{ event: WireEvent }> {
    return this.request('POST', this.questionPath(sessionId, questionId, 'final'), { text });
  }

  reportFocus(
    sessionId: string,
    kind: 'focus_lost' | 'focus_regained',
    activeQuestionId: string | null,
  ): Promise<{ event: WireEvent }> {
    return this.request('POST', `/sessions/${encodeURIComponent(sessionId)}/focus`, {
      kind,
      active_question_id: activeQuestionId,
      client_ts: new Date().toISOString(),
    });
  }

  trace(sessionId: string): Promise<TraceDocument> {
    return this.request('GET', `/sessions/${encodeURIComponent(sessionId)}/trace`);
  }

  private questionPath(sessionId: string, questionId: string, op: string): string {
    return `/sessions/${encodeURIComponent(sessionId)}/questions/${encodeURIComponent(questionId)}/${op}`;
  }
}
