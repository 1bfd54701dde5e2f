// DOM entry point. Three surfaces, routed by path or hash:
//   /exam/<examId>?token=...   student workspace (secure link target)
//   #/config                   instructor exam configuration panel
//   #/dashboard/<examId>       instructor analytics dashboard
// All state lives in the controllers; this file only projects it into DOM.

import { ApiClient, ApiError } from './api.js';
import {
  DEFAULT_DIRECTIVE_TEXT,
  DIRECTIVE_KINDS,
  directiveSelected,
  draftToConfig,
  emptyDraft,
  validateDraftLocally,
  violationsByField,
  type DirectiveKind,
  type ExamDraft,
} from './configPanel.js';
import {
  buildTimeline,
  completedLevels,
  emptyRubricForm,
  noToolUse,
  rubricFormErrors,
} from './dashboard.js';
import { RUBRIC_DIMENSIONS, type AnalyticsRow } from './types.js';
import { WorkspaceController, bannerText } from './workspace.js';

const root = document.getElementById('app') as HTMLElement;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === 'class') node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function baseUrl(): string {
  return window.location.origin;
}

// -- student workspace -------------------------------------------------------

async function mountWorkspace(examId: string, token: string): Promise<void> {
  const api = new ApiClient({ baseUrl: baseUrl(), token });
  let controller: WorkspaceController;
  try {
    const session = await api.openSession(examId);
    controller = new WorkspaceController(api, session, render);
    await controller.loadHistory();
  } catch (err) {
    root.replaceChildren(el('p', { class: 'banner error' }, bannerText(err)));
    return;
  }

  document.addEventListener('visibilitychange', () => {
    void controller.handleVisibility(document.hidden);
  });

  function render(): void {
    const q = controller.question();
    const gateOpen = controller.toolPanelEnabled();

    const tabs = el(
      'nav',
      { class: 'tabs' },
      ...controller.questions.map((entry) =>
        el(
          'button',
          {
            class: entry.questionId === controller.activeQuestion ? 'tab active' : 'tab',
            'data-question': entry.questionId,
          },
          `${entry.questionId} (${entry.gateState.replace('_', ' ')})`,
        ),
      ),
    );
    tabs.querySelectorAll('button').forEach((button) =>
      button.addEventListener('click', () => {
        controller.activeQuestion = button.dataset.question!;
        render();
      }),
    );

    const banner = controller.banner
      ? el('p', { class: 'banner error', role: 'alert' }, controller.banner)
      : el('span', {});

    const initialSection = el(
      'section',
      { class: 'card' },
      el('h3', {}, 'Initial answer'),
      el('p', { class: 'hint' }, 'Before using any tool, write what you think now. "I don\'t know" is a valid, unpenalized answer.'),
      q.initialAnswer !== null
        ? el('blockquote', { id: 'initial-committed' }, q.initialAnswer)
        : el('span', {}),
    );
    if (q.gateState === 'awaiting_initial') {
      const textarea = el('textarea', { id: 'initial-text', rows: '6' });
      textarea.value = q.draftInitial;
      textarea.addEventListener('input', () => (q.draftInitial = textarea.value));
      const submit = el('button', { id: 'initial-submit' }, 'Submit initial answer');
      submit.addEventListener('click', () => void controller.submitInitial());
      initialSection.append(textarea, submit);
    }

    // disabled (not hidden) until the initial answer posts
    const toolSection = el('section', { class: gateOpen ? 'card' : 'card disabled' });
    toolSection.append(
      el('h3', {}, 'Tools'),
      ...(gateOpen ? [] : [el('p', { class: 'hint' }, 'Locked until your initial answer is in.')]),
    );
    const selector = el('select', { id: 'tool-selector' });
    for (const tool of q.tools) {
      selector.append(el('option', { value: tool.tool_id }, tool.display_name));
    }
    if (q.selectedTool) selector.value = q.selectedTool;
    selector.addEventListener('change', () => (q.selectedTool = selector.value));
    selector.toggleAttribute('disabled', !gateOpen);
    const promptBox = el('textarea', { id: 'prompt-text', rows: '3' });
    promptBox.value = q.draftPrompt;
    promptBox.addEventListener('input', () => (q.draftPrompt = promptBox.value));
    promptBox.toggleAttribute('disabled', !gateOpen);
    const ask = el('button', { id: 'tool-submit' }, 'Ask');
    ask.addEventListener('click', () => void controller.askTool());
    ask.toggleAttribute('disabled', !gateOpen || controller.busy);
    toolSection.append(selector, promptBox, ask);

    const thread = el('section', { class: 'card', id: 'thread' });
    thread.append(el('h3', {}, 'Your reasoning so far'));
    for (const entry of q.thread) {
      const block = el(
        'article',
        { class: 'exchange' },
        el('p', { class: 'prompt' }, `You (${entry.toolId}): ${entry.prompt}`),
      );
      if (entry.response !== null) {
        block.append(el('pre', { class: 'response' }, entry.response));
      }
      for (const result of entry.searchResults) {
        block.append(el('p', { class: 'result' }, `${result.rank}. ${result.title} — ${result.snippet}`));
      }
      if (entry.errorMessage) {
        block.append(el('p', { class: 'banner error' }, `Tool failed: ${entry.errorMessage}`));
      }
      for (const comment of entry.comments) {
        block.append(el('p', { class: 'comment' }, `Your comment: ${comment}`));
      }
      if (entry.responseSeq !== null) {
        // every AI output gets an adjacent comment box
        const commentBox = el('input', { class: 'comment-box', placeholder: 'Challenge or verify this output…' });
        commentBox.value = entry.commentDraft;
        commentBox.addEventListener('input', () => (entry.commentDraft = commentBox.value));
        const send = el('button', {}, 'Comment');
        send.addEventListener('click', () => void controller.submitComment(entry));
        block.append(commentBox, send);
      }
      thread.append(block);
    }

    const finalSection = el(
      'section',
      { class: controller.finalEditorEnabled() ? 'card' : 'card disabled' },
      el('h3', {}, 'Final answer'),
      // the committed initial answer stays visible for self-comparison
      q.initialAnswer !== null
        ? el('details', {}, el('summary', {}, 'Compare with your initial answer'), el('blockquote', {}, q.initialAnswer))
        : el('span', {}),
      q.finalAnswer !== null ? el('blockquote', { class: 'final' }, q.finalAnswer) : el('span', {}),
    );
    const finalBox = el('textarea', { id: 'final-text', rows: '6' });
    finalBox.value = q.draftFinal;
    finalBox.addEventListener('input', () => (q.draftFinal = finalBox.value));
    finalBox.toggleAttribute('disabled', !controller.finalEditorEnabled());
    const submitFinal = el('button', { id: 'final-submit' },
      q.finalAnswer === null ? 'Submit final answer' : 'Revise final answer');
    submitFinal.addEventListener('click', () => void controller.submitFinal());
    submitFinal.toggleAttribute('disabled', !controller.finalEditorEnabled() || controller.busy);
    finalSection.append(finalBox, submitFinal);

    root.replaceChildren(
      el('h1', {}, controller.session.exam.title),
      el('p', { class: 'hint' }, `Closes at ${controller.session.exam.closes_at}`),
      banner,
      tabs,
      el('h2', {}, q.body),
      ...(q.instructorAnswer
        ? [el('details', { class: 'card' }, el('summary', {}, "Instructor's answer (read after your initial answer)"), el('blockquote', {}, q.instructorAnswer))]
        : []),
      initialSection,
      toolSection,
      thread,
      finalSection,
    );
  }

  render();
}

// -- instructor config panel ---------------------------------------------------

function mountConfigPanel(token: string): void {
  const api = new ApiClient({ baseUrl: baseUrl(), token });
  const draft: ExamDraft = emptyDraft();
  draft.authors = [];
  let fieldErrors = new Map<string, string>();
  let status = '';

  function render(): void {
    const errorFor = (path: string) =>
      fieldErrors.has(path) ? el('span', { class: 'field-error' }, fieldErrors.get(path)!) : el('span', {});

    const textField = (label: string, path: string, get: () => string, set: (v: string) => void) => {
      const input = el('input', { value: get() });
      input.addEventListener('input', () => set(input.value));
      return el('label', { class: 'field' }, label, input, errorFor(path));
    };

    const toolsSection = el('section', { class: 'card' }, el('h3', {}, 'Tools'));
    draft.tools.forEach((tool, i) => {
      const kindSelect = el('select', {});
      for (const kind of ['chat_model', 'search_engine']) {
        kindSelect.append(el('option', { value: kind }, kind));
      }
      kindSelect.value = tool.kind;
      kindSelect.addEventListener('change', () => (tool.kind = kindSelect.value as never));
      toolsSection.append(
        el('div', { class: 'row' },
          textField('tool id', `tools[${i}].tool_id`, () => tool.toolId, (v) => (tool.toolId = v)),
          textField('display name', `tools[${i}].display_name`, () => tool.displayName, (v) => (tool.displayName = v)),
          textField('provider ref', `tools[${i}].provider_ref`, () => tool.providerRef, (v) => (tool.providerRef = v)),
          kindSelect),
      );
    });
    const addTool = el('button', {}, 'Add tool');
    addTool.addEventListener('click', () => {
      draft.tools.push({ toolId: '', kind: 'chat_model', providerRef: 'mock', displayName: '' });
      render();
    });
    toolsSection.append(addTool);

    const questionsSection = el('section', { class: 'card' }, el('h3', {}, 'Questions'));
    draft.questions.forEach((question, qi) => {
      const body = el('textarea', { rows: '3' });
      body.value = question.body;
      body.addEventListener('input', () => (question.body = body.value));
      const qBlock = el('div', { class: 'question-block' },
        textField('question id', `questions[${qi}].question_id`, () => question.questionId, (v) => (question.questionId = v)),
        el('label', { class: 'field' }, 'body', body, errorFor(`questions[${qi}].body`)),
        textField('instructor answer (for critique questions)', `questions[${qi}].instructor_answer`,
          () => question.instructorAnswer, (v) => (question.instructorAnswer = v)));
      question.policies.forEach((policy, pi) => {
        const enabled = el('input', { type: 'checkbox' });
        enabled.checked = policy.enabled;
        enabled.addEventListener('change', () => (policy.enabled = enabled.checked));
        const kindSelect = el('select', { class: 'directive-kind' });
        for (const kind of DIRECTIVE_KINDS) kindSelect.append(el('option', { value: kind }, kind));
        kindSelect.value = policy.directiveKind;
        const instruction = el('textarea', { rows: '2', class: 'instruction' });
        instruction.value = policy.instructionText;
        instruction.addEventListener('input', () => (policy.instructionText = instruction.value));
        kindSelect.addEventListener('change', () => {
          // selecting a kind prefills its default text, still editable
          Object.assign(policy, directiveSelected(policy, kindSelect.value as DirectiveKind));
          render();
        });
        qBlock.append(el('div', { class: 'row policy' },
          el('label', {}, policy.toolId || `policy ${pi}`, enabled, 'enabled'),
          kindSelect,
          el('label', { class: 'field' }, 'instruction', instruction,
            errorFor(`questions[${qi}].policies[${pi}].directive.instruction_text`))));
      });
      const addPolicy = el('button', {}, 'Add tool policy');
      addPolicy.addEventListener('click', () => {
        question.policies.push({
          toolId: draft.tools[0]?.toolId ?? '',
          enabled: true,
          directiveKind: 'no_final_answer',
          instructionText: DEFAULT_DIRECTIVE_TEXT.no_final_answer ?? '',
        });
        render();
      });
      qBlock.append(addPolicy);
      questionsSection.append(qBlock);
    });
    const addQuestion = el('button', {}, 'Add question');
    addQuestion.addEventListener('click', () => {
      draft.questions.push({ questionId: '', body: '', weight: 1, instructorAnswer: '', policies: [] });
      render();
    });
    questionsSection.append(addQuestion, errorFor('questions'));

    const enrollment = el('section', { class: 'card' }, el('h3', {}, 'Enrollment and authors'));
    const students = el('textarea', { rows: '2', placeholder: 'one student id per line' });
    students.value = draft.students.join('\n');
    students.addEventListener('input', () => (draft.students = students.value.split('\n').filter(Boolean)));
    const authors = el('textarea', { rows: '2', placeholder: 'one instructor id per line' });
    authors.value = draft.authors.join('\n');
    authors.addEventListener('input', () => (draft.authors = authors.value.split('\n').filter(Boolean)));
    enrollment.append(el('label', { class: 'field' }, 'students', students),
      el('label', { class: 'field' }, 'authors', authors));

    const save = el('button', { id: 'save-exam' }, 'Create exam');
    save.addEventListener('click', () => {
      void (async () => {
        fieldErrors = new Map(validateDraftLocally(draft).map((e) => [e.path, e.message]));
        if (fieldErrors.size > 0) {
          status = 'Fix the highlighted fields.';
          render();
          return;
        }
        try {
          const result = await api.createExam(draftToConfig(draft));
          status = `Exam ${result.exam_id} created.`;
          fieldErrors = new Map();
        } catch (err) {
          if (err instanceof ApiError && err.code === 'invalid_config') {
            fieldErrors = violationsByField(err); // inline, at the offending field
            status = 'The server rejected the configuration.';
          } else {
            status = bannerText(err);
          }
        }
        render();
      })();
    });

    root.replaceChildren(
      el('h1', {}, 'Exam configuration'),
      status ? el('p', { class: 'banner' }, status) : el('span', {}),
      el('section', { class: 'card' },
        textField('exam id', 'exam_id', () => draft.examId, (v) => (draft.examId = v)),
        textField('title', 'title', () => draft.title, (v) => (draft.title = v)),
        textField('opens at (UTC, e.g. 2026-05-01T09:00:00Z)', 'opens_at', () => draft.opensAt, (v) => (draft.opensAt = v)),
        textField('closes at', 'closes_at', () => draft.closesAt, (v) => (draft.closesAt = v))),
      toolsSection,
      questionsSection,
      enrollment,
      save,
    );
  }

  render();
}

// -- instructor dashboard --------------------------------------------------------

async function mountDashboard(examId: string, token: string): Promise<void> {
  const api = new ApiClient({ baseUrl: baseUrl(), token });

  async function renderRows(): Promise<void> {
    let rows: AnalyticsRow[];
    try {
      rows = (await api.analytics(examId)).rows;
    } catch (err) {
      root.replaceChildren(el('p', { class: 'banner error' }, bannerText(err)));
      return;
    }

    const table = el('table', { class: 'rows' },
      el('tr', {}, ...['student', 'status', 'prompts', 'searches', 'comment coverage', 'off-task', ''].map((h) => el('th', {}, h))));
    for (const row of rows) {
      const indicators = Object.values(row.per_question);
      const prompts = indicators.reduce((n, ind) => n + ind.prompt_count, 0);
      const searches = indicators.reduce((n, ind) => n + ind.search_count, 0);
      const coverage = indicators.length
        ? (indicators.reduce((n, ind) => n + ind.comment_coverage, 0) / indicators.length).toFixed(2)
        : '—';
      const flags: string[] = [];
      if (row.status === 'absent') flags.push('Absent');
      else if (indicators.every((ind) => noToolUse(ind))) flags.push('no tool use');
      const drill = el('button', {}, 'timeline');
      drill.toggleAttribute('disabled', row.session_id === null);
      drill.addEventListener('click', () => void renderTimeline(row));
      table.append(el('tr', { class: flags.length ? 'flagged' : '' },
        el('td', {}, row.student_id),
        el('td', {}, row.status + (flags.length ? ` (${flags.join(', ')})` : '')),
        el('td', {}, String(prompts)),
        el('td', {}, String(searches)),
        el('td', {}, coverage),
        el('td', {}, `${row.off_task_count} (${row.off_task_total_s.toFixed(0)}s)`),
        el('td', {}, drill)));
    }

    root.replaceChildren(el('h1', {}, `Analytics: ${examId}`), table);
  }

  async function renderTimeline(row: AnalyticsRow): Promise<void> {
    const trace = await api.trace(row.session_id!);
    const timeline = buildTimeline(trace.events);
    const list = el('ol', { class: 'timeline' });
    for (const entry of timeline) {
      list.append(el('li', { 'data-seq': String(entry.seq), 'data-kind': entry.kind },
        el('strong', {}, `${entry.ts} ${entry.questionId ? `(${entry.questionId}) ` : ''}${entry.label}`),
        entry.sincePrevS !== null ? el('em', {}, ` +${entry.sincePrevS.toFixed(0)}s`) : el('span', {}),
        el('pre', {}, entry.text)));
    }

    const form = emptyRubricForm();
    let formStatus = '';
    const rubricCard = el('section', { class: 'card', id: 'rubric-form' });

    function renderRubric(): void {
      rubricCard.replaceChildren(el('h3', {}, 'Rubric'));
      const errors = rubricFormErrors(form);
      for (const dim of RUBRIC_DIMENSIONS) {
        const input = el('input', { type: 'number', min: '0', max: '4', 'data-dim': dim });
        if (form.levels[dim] !== null) input.value = String(form.levels[dim]);
        input.addEventListener('input', () => {
          form.levels[dim] = input.value === '' ? null : Number(input.value);
        });
        rubricCard.append(el('label', { class: 'field' }, dim.replace(/_/g, ' '), input,
          errors.has(dim) && form.levels[dim] !== null
            ? el('span', { class: 'field-error' }, errors.get(dim)!)
            : el('span', {})));
      }
      const notes = el('textarea', { rows: '2' });
      notes.value = form.notes;
      notes.addEventListener('input', () => (form.notes = notes.value));
      const submit = el('button', { id: 'rubric-submit' }, 'Save score');
      submit.addEventListener('click', () => {
        void (async () => {
          const errs = rubricFormErrors(form);
          if (errs.size > 0) {
            formStatus = 'Every dimension needs a level from 0 to 4.';
            renderRubric();
            return;
          }
          try {
            const result = await api.submitRubric(
              row.session_id!, trace.events.find((e) => e.question_id)?.question_id ?? '',
              completedLevels(form), form.notes);
            formStatus = `Saved: overall ${result.score.overall.toFixed(2)} (${result.score.band}).`;
          } catch (err) {
            formStatus = bannerText(err);
          }
          renderRubric();
        })();
      });
      rubricCard.append(el('label', { class: 'field' }, 'notes', notes), submit,
        formStatus ? el('p', { class: 'banner' }, formStatus) : el('span', {}));
    }

    renderRubric();
    const back = el('button', {}, '← back to rows');
    back.addEventListener('click', () => void renderRows());
    root.replaceChildren(
      el('h1', {}, `Trace: ${row.student_id}`),
      back, list, rubricCard);
  }

  await renderRows();
}

// -- routing ---------------------------------------------------------------------

function route(): void {
  const params = new URLSearchParams(window.location.search);
  const hash = window.location.hash;
  const examMatch = window.location.pathname.match(/^\/exam\/([^/]+)/)
    ?? hash.match(/^#\/exam\/([^/?]+)/);
  if (examMatch) {
    const token = params.get('token') ?? new URLSearchParams(hash.split('?')[1] ?? '').get('token');
    if (!token) {
      root.replaceChildren(el('p', { class: 'banner error' }, 'This exam link is missing its token.'));
      return;
    }
    void mountWorkspace(examMatch[1], token);
    return;
  }
  const dashMatch = hash.match(/^#\/dashboard\/([^/?]+)/);
  if (dashMatch) {
    void mountDashboard(dashMatch[1], requireInstructorToken());
    return;
  }
  if (hash.startsWith('#/config')) {
    mountConfigPanel(requireInstructorToken());
    return;
  }
  root.replaceChildren(
    el('h1', {}, 'mindexam'),
    el('p', {}, 'Students: open the secure link you received.'),
    el('p', {}, 'Instructors: '),
    el('ul', {},
      el('li', {}, el('a', { href: '#/config' }, 'exam configuration panel')),
      el('li', {}, 'analytics: #/dashboard/<exam-id>')),
  );
}

function requireInstructorToken(): string {
  let token = sessionStorage.getItem('mindexam-instructor-token');
  if (!token) {
    token = window.prompt('Instructor token:') ?? '';
    sessionStorage.setItem('mindexam-instructor-token', token);
  }
  return token;
}

window.addEventListener('hashchange', route);
route();
