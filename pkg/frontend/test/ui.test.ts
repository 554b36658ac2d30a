// UI behavior against a mocked service, covering the release checks:
// alternating turns on send, truncation badge, case presets pre-filling the
// input, and a 503 flipping the banner to loading without losing the typed
// question.

import { beforeEach, describe, expect, it } from 'vitest';

import { ApiClient, AskResponse, CaseStudy } from '../src/api.js';
import { createChatApp } from '../src/ui.js';

const CASES: CaseStudy[] = [
  { case_id: 1, difficulty: 'hard', narrative: 'Property dispute over a plot in Dhaka.', question: 'How the Court can find the valid documents?' },
  { case_id: 2, difficulty: 'easy', narrative: 'Charged under the Special Powers Act, 1974.', question: 'Do the actions warrant prosecution?' },
  { case_id: 3, difficulty: 'medium', narrative: 'Charged with murder under Section 302.', question: 'Did the accused commit murder?' },
];

interface MockBehavior {
  askStatus?: number;
  truncated?: boolean;
  casesFail?: boolean;
}

function mockClient(behavior: MockBehavior = {}): ApiClient {
  const fetchFn = (async (url: RequestInfo | URL, init?: RequestInit) => {
    const path = String(url);
    if (path.endsWith('/v1/ask')) {
      if (behavior.askStatus && behavior.askStatus !== 200) {
        return new Response(JSON.stringify({ detail: 'unavailable' }),
          { status: behavior.askStatus });
      }
      const body = JSON.parse(String(init?.body)) as { question: string };
      const reply: AskResponse = {
        answer: `Echo: ${body.question}`,
        truncated: behavior.truncated ?? false,
        latency_ms: 1.5,
        model: 'mock',
        disclaimer: 'not legal advice',
      };
      return new Response(JSON.stringify(reply), { status: 200 });
    }
    if (path.endsWith('/v1/cases')) {
      if (behavior.casesFail) {
        return new Response('{"detail":"down"}', { status: 500 });
      }
      return new Response(JSON.stringify(CASES), { status: 200 });
    }
    if (path.endsWith('/v1/health')) {
      return new Response(JSON.stringify({ status: 'ok', model_fingerprint: 'mock' }),
        { status: 200 });
    }
    return new Response('{}', { status: 404 });
  }) as typeof fetch;
  return new ApiClient('http://mock-service', fetchFn);
}

class MemoryStorage {
  private data = new Map<string, string>();
  getItem(k: string) { return this.data.get(k) ?? null; }
  setItem(k: string, v: string) { this.data.set(k, v); }
}

function mount(behavior: MockBehavior = {}) {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById('app')!;
  const app = createChatApp(root, mockClient(behavior), {
    storage: new MemoryStorage(), now: () => 1,
  });
  const input = root.querySelector<HTMLTextAreaElement>('.question-input')!;
  return { app, root, input };
}

describe('sending a question', () => {
  it('appends alternating user/assistant turns', async () => {
    const { app, root, input } = mount();
    input.value = 'What is the penalty clause?';
    await app.sendQuestion();
    let roles = [...root.querySelectorAll('.turn')].map((t) => t.className);
    expect(roles).toEqual(['turn turn-user', 'turn turn-assistant']);

    input.value = 'And the savings clause?';
    await app.sendQuestion();
    roles = [...root.querySelectorAll('.turn')].map((t) => t.className);
    expect(roles).toEqual(['turn turn-user', 'turn turn-assistant',
      'turn turn-user', 'turn turn-assistant']);
    const texts = [...root.querySelectorAll('.turn-text')].map((t) => t.textContent);
    expect(texts[0]).toBe('What is the penalty clause?');
    expect(texts[1]).toBe('Echo: What is the penalty clause?');
  });

  it('clears the input only after a successful answer', async () => {
    const { app, input } = mount();
    input.value = 'question';
    await app.sendQuestion();
    expect(input.value).toBe('');
  });

  it('disables send while the input is empty', () => {
    const { root, input } = mount();
    const send = root.querySelector<HTMLButtonElement>('.send-button')!;
    input.value = '';
    input.dispatchEvent(new Event('input'));
    expect(send.disabled).toBe(true);
    input.value = 'text';
    input.dispatchEvent(new Event('input'));
    expect(send.disabled).toBe(false);
  });

  it('renders answers verbatim without parsing markup', async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById('app')!;
    const fetchFn = (async () => new Response(JSON.stringify({
      answer: '<img src=x onerror="window.pwned=1">',
      truncated: false, latency_ms: 1, model: 'mock', disclaimer: '',
    }), { status: 200 })) as typeof fetch;
    const app = createChatApp(root, new ApiClient('http://mock', fetchFn),
      { storage: new MemoryStorage() });
    const input = root.querySelector<HTMLTextAreaElement>('.question-input')!;
    input.value = 'attack';
    await app.sendQuestion();
    const answer = root.querySelectorAll<HTMLElement>('.turn-assistant .turn-text')[0]!;
    expect(answer.textContent).toContain('<img');
    expect(answer.querySelector('img')).toBeNull();
    expect((window as { pwned?: number }).pwned).toBeUndefined();
  });
});

describe('truncation badge', () => {
  it('marks truncated assistant turns', async () => {
    const { app, root, input } = mount({ truncated: true });
    input.value = 'very long question';
    await app.sendQuestion();
    const badge = root.querySelector('.turn-assistant .badge-truncated');
    expect(badge).not.toBeNull();
    expect(badge!.textContent).toMatch(/cut off/);
  });

  it('omits the badge for complete answers', async () => {
    const { app, root, input } = mount({ truncated: false });
    input.value = 'short question';
    await app.sendQuestion();
    expect(root.querySelector('.badge-truncated')).toBeNull();
  });
});

describe('case presets', () => {
  it('populates three presets with difficulty labels from the service', async () => {
    const { app, root } = mount();
    await app.loadCasePresets();
    const presets = [...root.querySelectorAll('.case-preset')];
    expect(presets).toHaveLength(3);
    const difficulties = [...root.querySelectorAll('.case-difficulty')]
      .map((d) => d.textContent);
    expect(difficulties).toEqual(['hard', 'easy', 'medium']);
  });

  it('pre-fills the question box when a preset is picked', async () => {
    const { app, root, input } = mount();
    await app.loadCasePresets();
    const second = root.querySelectorAll<HTMLButtonElement>('.case-pick')[1]!;
    second.click();
    expect(input.value).toContain('Special Powers Act');
    expect(input.value).toContain('Do the actions warrant prosecution?');
    // nothing was sent yet: the user still edits and submits
    expect(root.querySelectorAll('.turn')).toHaveLength(0);
  });

  it('shows a retry affordance when the case list fails', async () => {
    const { app, root } = mount({ casesFail: true });
    await app.loadCasePresets();
    expect(root.querySelectorAll('.case-preset')).toHaveLength(0);
    const error = root.querySelector<HTMLElement>('.case-error')!;
    expect(error.hidden).toBe(false);
    expect(root.querySelector('.case-retry')).not.toBeNull();
  });
});

describe('service outages', () => {
  it('flips the banner to loading on 503 and keeps the typed question', async () => {
    const { app, root, input } = mount({ askStatus: 503 });
    input.value = 'keep me around';
    await app.sendQuestion();
    const banner = root.querySelector<HTMLElement>('.health-banner')!;
    expect(banner.classList.contains('banner-loading')).toBe(true);
    expect(banner.textContent).toMatch(/loading/i);
    expect(input.value).toBe('keep me around');
    // the optimistic user turn was rolled back; transcript stays alternating
    expect(root.querySelectorAll('.turn')).toHaveLength(0);
    expect(app.state().pending).toBe(false);
  });

  it('renders non-503 errors inline and preserves the input', async () => {
    const { app, root, input } = mount({ askStatus: 500 });
    input.value = 'still here';
    await app.sendQuestion();
    const errorBox = root.querySelector<HTMLElement>('.request-error')!;
    expect(errorBox.hidden).toBe(false);
    expect(errorBox.textContent).toMatch(/500/);
    expect(input.value).toBe('still here');
  });

  it('reflects health polling in the banner', async () => {
    const { app, root } = mount();
    await app.refreshHealth();
    const banner = root.querySelector<HTMLElement>('.health-banner')!;
    expect(banner.textContent).toMatch(/ready/i);
  });
});
