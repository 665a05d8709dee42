/** Application entry point: session token handling and the render loop. */

import { ApiClient, MemoryStorage, OfflineQueue, type StorageLike } from './api';
import { render } from './render';
import { AnnotationSession, type Answer } from './session';

function storage(): StorageLike {
  try {
    window.localStorage.setItem('feedeval.probe', '1');
    window.localStorage.removeItem('feedeval.probe');
    return window.localStorage;
  } catch {
    return new MemoryStorage();
  }
}

function sessionToken(store: StorageLike): string {
  const existing = store.getItem('feedeval.session');
  if (existing) {
    return existing;
  }
  const token = `s-${Date.now()}-${Math.random().toString(36).slice(2, 10)}`;
  store.setItem('feedeval.session', token);
  return token;
}

function annotatorId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get('annotator');
  if (fromQuery) {
    return fromQuery;
  }
  const answer = window.prompt('Annotator id:') ?? '';
  return answer.trim();
}

/** Show a validation/conflict message inside the current task view without
 * re-rendering, so the annotator's inputs stay put. */
function showInline(root: HTMLElement, message: string): void {
  let element = root.querySelector<HTMLElement>('.inline-error');
  if (!element) {
    element = document.createElement('div');
    element.className = 'inline-error';
    root.prepend(element);
  }
  element.textContent = message;
}

export function boot(root: HTMLElement): void {
  const store = storage();
  const api = new ApiClient('', (input, init) => fetch(input, init));
  const queue = new OfflineQueue(store);
  const annotator = annotatorId();
  if (!annotator) {
    root.innerHTML = '<div class="notice error">An annotator id is required.</div>';
    return;
  }
  const session = new AnnotationSession(api, queue, annotator, sessionToken(store));

  const callbacks = {
    async onSubmit(answer: Answer) {
      const state = await session.submit(answer);
      if (state.phase === 'error' && state.recoverable) {
        showInline(root, state.message);
        return;
      }
      render(root, state, callbacks);
    },
    async onRetry() {
      render(root, await session.reconnect(), callbacks);
    },
  };

  window.addEventListener('online', callbacks.onRetry);

  session
    .start()
    .then((state) => render(root, state, callbacks))
    .catch((error) => {
      root.innerHTML = `<div class="notice error">${String(error)}</div>`;
    });
}

const rootElement = document.getElementById('app');
if (rootElement) {
  boot(rootElement);
}
