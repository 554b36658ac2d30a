// Session state: an alternating transcript plus request/health flags.
// All transitions are pure functions so the invariants are testable
// without a DOM.

export type Role = 'user' | 'assistant';
export type ServiceHealth = 'ok' | 'loading' | 'down';

export interface ChatTurn {
  role: Role;
  text: string;
  truncated: boolean; // meaningful on assistant turns only
  timestamp: number;
}

export interface SessionState {
  turns: ChatTurn[];
  pending: boolean;
  serviceHealth: ServiceHealth;
}

export function emptySession(): SessionState {
  return { turns: [], pending: false, serviceHealth: 'loading' };
}

/** Turns must alternate user/assistant and start with a user turn. */
export function alternationHolds(turns: ChatTurn[]): boolean {
  return turns.every((turn, i) =>
    turn.role === (i % 2 === 0 ? 'user' : 'assistant'));
}

function pushTurn(state: SessionState, turn: ChatTurn): SessionState {
  const turns = [...state.turns, turn];
  if (!alternationHolds(turns)) {
    throw new Error(`turn ${turns.length - 1} breaks user/assistant alternation`);
  }
  return { ...state, turns };
}

export function beginQuestion(state: SessionState, text: string, now: number): SessionState {
  if (state.pending) throw new Error('a request is already in flight');
  if (!text.trim()) throw new Error('question is empty');
  const next = pushTurn(state, {
    role: 'user', text: text.trim(), truncated: false, timestamp: now,
  });
  return { ...next, pending: true };
}

export function completeAnswer(
  state: SessionState, answer: string, truncated: boolean, now: number,
): SessionState {
  const next = pushTurn(state, {
    role: 'assistant', text: answer, truncated, timestamp: now,
  });
  return { ...next, pending: false, serviceHealth: 'ok' };
}

/** A failed request removes the optimistic user turn so the transcript
 *  stays alternating and the question can be retried from the input box. */
export function failQuestion(state: SessionState, health: ServiceHealth): SessionState {
  const turns = state.turns.at(-1)?.role === 'user'
    ? state.turns.slice(0, -1)
    : state.turns;
  return { ...state, turns, pending: false, serviceHealth: health };
}

export function setHealth(state: SessionState, health: ServiceHealth): SessionState {
  return { ...state, serviceHealth: health };
}

// ---------------------------------------------------------------------------
// Browser-storage persistence (session history never leaves the client)
// ---------------------------------------------------------------------------

const STORAGE_KEY = 'ukil-chat-session-v1';

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export function saveSession(state: SessionState, storage: StorageLike): void {
  storage.setItem(STORAGE_KEY, JSON.stringify(state.turns));
}

export function restoreSession(storage: StorageLike): SessionState {
  const raw = storage.getItem(STORAGE_KEY);
  if (!raw) return emptySession();
  try {
    const turns = JSON.parse(raw) as ChatTurn[];
    if (!Array.isArray(turns) || !alternationHolds(turns)) return emptySession();
    return { ...emptySession(), turns };
  } catch {
    return emptySession();
  }
}
