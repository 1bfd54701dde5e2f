// Integration against a live server: the webapp's client gate plus the
// server's authoritative re-check (criterion: scripted bypass must still be
// rejected), and dashboard fidelity against the served trace.
//
// Spawns `python3 -m mindexam.cli serve` on a fresh data directory.

import { spawn, execFileSync, type ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { buildTimeline, completedLevels, emptyRubricForm, rubricFormErrors } from '../src/dashboard.js';
import { WorkspaceController } from '../src/workspace.js';

const PYTHON = process.env.MINDEXAM_PYTHON ?? 'python3';
const EXAM_ID = 'live-exam';
const INSTRUCTOR_TOKEN = 'tok-live-instructor';

let server: ChildProcess | null = null;
let dataDir: string;
let baseUrl: string;
let studentTokens: Record<string, string>;

function examConfig() {
  const now = Date.now();
  const iso = (ms: number) => new Date(ms).toISOString().replace(/\.\d{3}Z$/, 'Z');
  return {
    exam_id: EXAM_ID,
    title: 'Live integration exam',
    opens_at: iso(now - 60_000),
    closes_at: iso(now + 30 * 60_000),
    tools: [
      { tool_id: 'chat', kind: 'chat_model', provider_ref: 'mock', display_name: 'Chat AI' },
      { tool_id: 'search', kind: 'search_engine', provider_ref: 'mock', display_name: 'Web Search' },
      { tool_id: 'chat-off', kind: 'chat_model', provider_ref: 'mock', display_name: 'Hidden Chat' },
    ],
    students: ['s1', 's2'],
    authors: ['inst-live'],
    questions: [
      {
        question_id: 'q1',
        body: 'Can zero trust remove all dependence?',
        weight: 1.0,
        policies: [
          { tool_id: 'chat', enabled: true, directive: { kind: 'no_final_answer' } },
          { tool_id: 'search', enabled: true, directive: { kind: 'unrestricted' } },
          { tool_id: 'chat-off', enabled: false, directive: { kind: 'unrestricted' } },
        ],
      },
    ],
  };
}

async function waitForHealth(url: string, timeoutMs = 20_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${url}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error('server did not come up');
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), 'mindexam-it-'));
  const examPath = join(dataDir, 'exam.json');
  writeFileSync(examPath, JSON.stringify(examConfig()));
  const serverConfigPath = join(dataDir, 'server.json');
  writeFileSync(
    serverConfigPath,
    JSON.stringify({ instructors: [{ id: 'inst-live', token: INSTRUCTOR_TOKEN }] }),
  );

  execFileSync(PYTHON, ['-m', 'mindexam.cli', 'create-exam', examPath, '--data-dir', dataDir]);
  const links = execFileSync(
    PYTHON,
    ['-m', 'mindexam.cli', 'issue-links', EXAM_ID, '--data-dir', dataDir],
    { encoding: 'utf-8' },
  );
  studentTokens = {};
  for (const line of links.trim().split('\n')) {
    const [student, url] = line.split('\t');
    studentTokens[student] = new URL(url).searchParams.get('token')!;
  }

  const port = 8700 + (process.pid % 250);
  baseUrl = `http://127.0.0.1:${port}`;
  server = spawn(
    PYTHON,
    ['-m', 'mindexam.cli', 'serve', '--data-dir', dataDir,
      '--config', serverConfigPath, '--port', String(port)],
    { stdio: 'ignore' },
  );
  await waitForHealth(baseUrl);
}, 60_000);

afterAll(() => {
  server?.kill('SIGTERM');
  rmSync(dataDir, { recursive: true, force: true });
});

describe('UI gate against the live server', () => {
  it('keeps the tool panel inert until the initial answer posts, and the server rejects a scripted bypass with 409', async () => {
    const api = new ApiClient({ baseUrl, token: studentTokens.s1 });
    const session = await api.openSession(EXAM_ID);
    const controller = new WorkspaceController(api, session);

    expect(controller.toolPanelEnabled('q1')).toBe(false);
    // the disabled tool never reached the selector
    expect(controller.question('q1').tools.map((t) => t.tool_id)).toEqual(['chat', 'search']);

    // scripted bypass: hit the endpoint directly, skipping the UI gate
    const bypass = await fetch(
      `${baseUrl}/sessions/${session.session_id}/questions/q1/ai`,
      {
        method: 'POST',
        headers: {
          Authorization: `Bearer ${studentTokens.s1}`,
          'Content-Type': 'application/json',
        },
        body: JSON.stringify({ tool_id: 'chat', prompt: 'give me the answer' }),
      },
    );
    expect(bypass.status).toBe(409);
    const body = await bypass.json();
    expect(body.error.code).toBe('order_violation');

    // the bypass attempt logged nothing: the trace is still empty
    const trace = await api.trace(session.session_id);
    expect(trace.events).toHaveLength(0);

    // the legitimate path unlocks the panel
    controller.question('q1').draftInitial = "I don't know";
    expect(await controller.submitInitial('q1')).toBe(true);
    expect(controller.toolPanelEnabled('q1')).toBe(true);

    controller.question('q1').selectedTool = 'chat';
    controller.question('q1').draftPrompt = 'what is dependence?';
    expect(await controller.askTool('q1')).toBe(true);
    const thread = controller.question('q1').thread;
    expect(thread).toHaveLength(1);
    expect(thread[0].response).toContain('PROMPT[what is dependence?]');
  }, 30_000);
});

describe('dashboard fidelity against the live server', () => {
  it('renders the timeline in server order and round-trips a rubric score', async () => {
    // drive a complete session as the second student
    const studentApi = new ApiClient({ baseUrl, token: studentTokens.s2 });
    const session = await studentApi.openSession(EXAM_ID);
    const controller = new WorkspaceController(studentApi, session);
    controller.question('q1').draftInitial = "I don't know";
    await controller.submitInitial('q1');
    for (const prompt of ['what is zero trust?', 'and zero risk?']) {
      controller.question('q1').selectedTool = 'chat';
      controller.question('q1').draftPrompt = prompt;
      expect(await controller.askTool('q1')).toBe(true);
    }
    for (const entry of controller.question('q1').thread) {
      entry.commentDraft = 'checked against class notes';
      expect(await controller.submitComment(entry, 'q1')).toBe(true);
    }
    controller.question('q1').draftFinal = 'Dependence cannot be eliminated.';
    expect(await controller.submitFinal('q1')).toBe(true);

    // instructor drill-down
    const instructorApi = new ApiClient({ baseUrl, token: INSTRUCTOR_TOKEN });
    const trace = await instructorApi.trace(session.session_id);
    const timeline = buildTimeline(trace.events);

    // event-for-event match with the server's order
    expect(timeline.map((row) => [row.seq, row.kind])).toEqual(
      trace.events.map((event) => [event.seq, event.kind]),
    );
    expect(timeline.map((row) => row.kind)).toEqual([
      'initial_answer',
      'ai_prompt', 'ai_response',
      'ai_prompt', 'ai_response',
      'ai_comment', 'ai_comment',
      'final_answer',
    ]);

    // rubric entry through the form helpers, then read back via analytics
    const form = emptyRubricForm();
    form.levels = {
      understanding: 3,
      reasoning: 4,
      independence: 4,
      improvement_over_time: 3,
      recall_from_class_discussions: 4,
    };
    form.notes = 'strong verification';
    expect(rubricFormErrors(form).size).toBe(0);
    const saved = await instructorApi.submitRubric(
      session.session_id, 'q1', completedLevels(form), form.notes);
    expect(saved.score.band).toBe('high');

    const analytics = await instructorApi.analytics(EXAM_ID);
    const row = analytics.rows.find((r) => r.student_id === 's2')!;
    expect(row.per_question.q1.prompt_count).toBe(2);
    expect(row.per_question.q1.comment_coverage).toBe(1);
    expect(row.scores).toHaveLength(1);
    expect(row.scores[0].overall).toBeCloseTo(3.6, 9);
    expect(row.scores[0].notes).toBe('strong verification');
  }, 30_000);
});
