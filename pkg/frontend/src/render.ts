/** Thin DOM layer: renders the current session state into #app.
 *
 * All decisions live in AnnotationSession; this module only draws and wires
 * input handlers. Submission stays disabled until the answer is complete.
 */

import { definitionFor, LIKERT_DEFINITIONS } from './dimensions';
import type { Answer, SessionState } from './session';
import type { TaskView } from './types';

export interface RenderCallbacks {
  onSubmit(answer: Answer): void;
  onRetry(): void;
}

const ANON_TOKEN = /@[A-Z]+\d*/g;

/** Escape text, then wrap anonymization tokens in a muted span so raters
 * notice them without penalizing the essay for them. */
export function essayHtml(text: string): string {
  const escaped = text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;');
  return escaped.replace(ANON_TOKEN, (token) => `<span class="anon">${token}</span>`);
}

function progressLabel(task: TaskView): string {
  if (task.is_practice) {
    return `Practice round ${task.practice_round}`;
  }
  return 'Main task';
}

function pairwiseControls(root: HTMLElement, callbacks: RenderCallbacks): void {
  const submit = root.querySelector<HTMLButtonElement>('#submit')!;
  let winner: 'A' | 'B' | null = null;
  for (const side of ['A', 'B'] as const) {
    const button = root.querySelector<HTMLButtonElement>(`#choose-${side}`)!;
    button.addEventListener('click', () => {
      winner = side;
      root.querySelectorAll('.pane').forEach((pane) => pane.classList.remove('chosen'));
      button.closest('.pane')?.classList.add('chosen');
      submit.disabled = false;
    });
  }
  submit.addEventListener('click', () => {
    if (winner) {
      callbacks.onSubmit({ winner });
    }
  });
}

function likertControls(root: HTMLElement, scales: string[], callbacks: RenderCallbacks): void {
  const submit = root.querySelector<HTMLButtonElement>('#submit')!;
  const chosen = new Map<string, number>();
  root.querySelectorAll<HTMLInputElement>('input[type=radio]').forEach((input) => {
    input.addEventListener('change', () => {
      chosen.set(input.name, Number(input.value));
      submit.disabled = chosen.size !== scales.length;
    });
  });
  submit.addEventListener('click', () => {
    callbacks.onSubmit({ ratings: scales.map((scale) => chosen.get(scale) ?? 0) });
  });
}

function taskHtml(task: TaskView): string {
  const banner = `<div class="banner">${definitionFor(task.kind, task.dimension)}</div>`;
  const progress = `<div class="progress">${progressLabel(task)}</div>`;
  const excerpt = task.excerpt
    ? `<details class="excerpt"><summary>Excerpt</summary><p>${essayHtml(task.excerpt)}</p></details>`
    : '';
  const essay = `<section class="essay"><h2>Essay</h2><p>${essayHtml(task.context)}</p>${excerpt}</section>`;

  if (task.kind === 'likert') {
    const rows = (task.scales ?? [])
      .map((scale) => {
        const label = LIKERT_DEFINITIONS[scale] ?? scale;
        const buttons = [1, 2, 3, 4, 5]
          .map(
            (value) =>
              `<label><input type="radio" name="${scale}" value="${value}">${value}</label>`
          )
          .join('');
        return `<div class="scale"><p>${label}</p><div class="radios">${buttons}</div></div>`;
      })
      .join('');
    return `${progress}${banner}${essay}
      <section class="feedback-single"><h2>Feedback</h2><p>${essayHtml(task.feedback ?? '')}</p></section>
      <form class="likert">${rows}</form>
      <button id="submit" disabled>Submit ratings</button>`;
  }

  const label = task.kind === 'revision_pairwise' ? 'Revised essay' : 'Feedback';
  return `${progress}${banner}${essay}
    <div class="panes">
      <section class="pane"><h2>${label} A</h2><p>${essayHtml(task.a ?? '')}</p>
        <button id="choose-A">Prefer A</button></section>
      <section class="pane"><h2>${label} B</h2><p>${essayHtml(task.b ?? '')}</p>
        <button id="choose-B">Prefer B</button></section>
    </div>
    <button id="submit" disabled>Submit choice</button>`;
}

export function render(
  root: HTMLElement,
  state: SessionState,
  callbacks: RenderCallbacks
): void {
  if (state.phase === 'task') {
    root.innerHTML = taskHtml(state.task);
    if (state.task.kind === 'likert') {
      likertControls(root, state.task.scales ?? [], callbacks);
    } else {
      pairwiseControls(root, callbacks);
    }
    return;
  }
  if (state.phase === 'offline') {
    root.innerHTML = `<div class="notice">You appear to be offline. ${state.pending} judgment(s) saved locally and will be sent automatically.
      <button id="retry">Retry now</button></div>`;
    root.querySelector('#retry')?.addEventListener('click', callbacks.onRetry);
    return;
  }
  if (state.phase === 'done') {
    const s = state.summary;
    root.innerHTML = `<div class="notice done"><h2>All tasks complete</h2>
      <p>Practice: ${s.practiceCompleted} &middot; Main: ${s.mainCompleted} &middot; Recovered offline: ${s.flushedOffline}</p></div>`;
    return;
  }
  if (state.phase === 'error') {
    root.innerHTML = `<div class="notice error">${state.message}
      ${state.recoverable ? '<button id="retry">Back to task</button>' : ''}</div>`;
    root.querySelector('#retry')?.addEventListener('click', callbacks.onRetry);
    return;
  }
  root.innerHTML = '<div class="notice">Loading&hellip;</div>';
}
