// DOM wiring for the single-page chat client. Answer text is rendered with
// textContent only, never parsed as markup.

import { ApiClient, ApiError, CaseStudy } from './api.js';
import {
  SessionState, beginQuestion, completeAnswer, emptySession, failQuestion,
  restoreSession, saveSession, setHealth,
} from './state.js';

export interface ChatAppOptions {
  storage?: { getItem(k: string): string | null; setItem(k: string, v: string): void };
  now?: () => number;
}

export interface ChatApp {
  state(): SessionState;
  sendQuestion(): Promise<void>;
  loadCasePresets(): Promise<void>;
  refreshHealth(): Promise<void>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function createChatApp(
  root: HTMLElement, client: ApiClient, options: ChatAppOptions = {},
): ChatApp {
  const storage = options.storage ?? window.localStorage;
  const now = options.now ?? Date.now;
  let state: SessionState = restoreSession(storage);

  root.innerHTML = '';
  const banner = el('div', 'health-banner');
  const sidebar = el('aside', 'case-sidebar');
  const sidebarTitle = el('h2', undefined, 'Case studies');
  const caseList = el('ul', 'case-list');
  const caseError = el('div', 'case-error');
  const retryButton = el('button', 'case-retry', 'Retry loading cases');
  retryButton.addEventListener('click', () => { void loadCasePresets(); });
  caseError.hidden = true;
  caseError.append(el('span', undefined, 'Could not load case studies. '), retryButton);
  sidebar.append(sidebarTitle, caseList, caseError);

  const main = el('main', 'chat-main');
  const transcript = el('ol', 'transcript');
  const errorBox = el('div', 'request-error');
  errorBox.hidden = true;
  const disclaimer = el('p', 'disclaimer',
    'Answers are generated by an experimental research model and are not legal advice.');
  const form = el('form', 'ask-form');
  const input = el('textarea', 'question-input') as HTMLTextAreaElement;
  input.placeholder = 'Ask about an act or section...';
  input.rows = 3;
  const send = el('button', 'send-button', 'Ask') as HTMLButtonElement;
  send.type = 'submit';
  form.append(input, send);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void sendQuestion();
  });
  input.addEventListener('input', () => updateControls());
  main.append(transcript, errorBox, form, disclaimer);
  root.append(banner, sidebar, main);

  function updateControls(): void {
    send.disabled = state.pending || !input.value.trim();
    banner.dataset.health = state.serviceHealth;
    banner.textContent =
      state.serviceHealth === 'ok' ? 'Service ready'
        : state.serviceHealth === 'loading' ? 'Service loading, please wait'
          : 'Service unreachable';
    banner.classList.toggle('banner-loading', state.serviceHealth === 'loading');
    banner.classList.toggle('banner-down', state.serviceHealth === 'down');
  }

  function renderTranscript(): void {
    transcript.innerHTML = '';
    for (const turn of state.turns) {
      const item = el('li', `turn turn-${turn.role}`);
      item.append(el('span', 'turn-role', turn.role === 'user' ? 'You' : 'Assistant'));
      item.append(el('p', 'turn-text', turn.text));
      if (turn.role === 'assistant' && turn.truncated) {
        item.append(el('span', 'badge-truncated', 'answer cut off at the length limit'));
      }
      transcript.append(item);
    }
    if (state.pending) {
      transcript.append(el('li', 'turn turn-pending', 'Thinking...'));
    }
    updateControls();
  }

  function setState(next: SessionState): void {
    state = next;
    saveSession(state, storage);
    renderTranscript();
  }

  async function sendQuestion(): Promise<void> {
    const question = input.value;
    if (!question.trim() || state.pending) return;
    errorBox.hidden = true;
    setState(beginQuestion(state, question, now()));
    try {
      const reply = await client.ask(question.trim());
      setState(completeAnswer(state, reply.answer, reply.truncated, now()));
      input.value = '';
      updateControls();
    } catch (err) {
      // the question stays in the input box for retry
      if (err instanceof ApiError && err.status === 503) {
        setState(failQuestion(state, 'loading'));
      } else {
        setState(failQuestion(state, err instanceof ApiError ? 'ok' : 'down'));
        errorBox.textContent =
          err instanceof ApiError ? `Request failed (${err.status}): ${err.message}`
            : 'Request failed: network error';
        errorBox.hidden = false;
      }
    }
  }

  async function loadCasePresets(): Promise<void> {
    caseList.innerHTML = '';
    try {
      const cases = await client.cases();
      caseError.hidden = true;
      for (const preset of cases) {
        caseList.append(renderPreset(preset));
      }
    } catch {
      caseError.hidden = false;
    }
  }

  function renderPreset(preset: CaseStudy): HTMLLIElement {
    const item = el('li', 'case-preset');
    const pick = el('button', 'case-pick') as HTMLButtonElement;
    pick.type = 'button';
    pick.append(
      el('span', 'case-name', `Case ${preset.case_id}`),
      el('span', `case-difficulty difficulty-${preset.difficulty}`, preset.difficulty),
    );
    pick.title = preset.narrative;
    pick.addEventListener('click', () => {
      // pre-fill only; the user edits and submits
      input.value = `${preset.narrative}\n${preset.question}`;
      input.focus();
      updateControls();
    });
    item.append(pick);
    return item;
  }

  async function refreshHealth(): Promise<void> {
    try {
      const health = await client.health();
      setState(setHealth(state, health.status === 'ok' ? 'ok' : 'loading'));
    } catch {
      setState(setHealth(state, 'down'));
    }
  }

  renderTranscript();
  updateControls();

  return {
    state: () => state,
    sendQuestion,
    loadCasePresets,
    refreshHealth,
  };
}

export function resetSessionForTests(): SessionState {
  return emptySession();
}
