// Client view state. One rule above all: the server is the source of truth.
// Settings shown to the user only ever come from settings_state frames, the
// proposal banner only from proposal_state, and the event list is kept in
// seq order no matter how frames arrive.

import type {
  AgentSettings,
  ChatEvent,
  ProposalStateBody,
  ServerFrame,
} from './protocol.js';

export type ConnectionState = 'idle' | 'connecting' | 'connected' | 'closed';

export interface PendingConfirmation {
  seq: number;
  prompt: string;
}

export interface InlineError {
  error: string;
  detail?: string;
}

export interface ClientViewState {
  connection: ConnectionState;
  self: string | null;
  room: string | null;
  events: ChatEvent[];
  settings: AgentSettings | null;
  proposal: ProposalStateBody | null;
  pendingConfirmation: PendingConfirmation | null;
  errors: InlineError[];
  agentName: string | null;
}

export const initialState = (): ClientViewState => ({
  connection: 'idle',
  self: null,
  room: null,
  events: [],
  settings: null,
  proposal: null,
  pendingConfirmation: null,
  errors: [],
  agentName: null,
});

const MAX_ERRORS = 20;

// the agent's ask-first prompt; anything matching it becomes a pending
// confirmation card until a settings notice resolves it
const CONFIRMATION_RE = /Reply yes to confirm\.\s*$/;

const insertBySeq = (events: ChatEvent[], event: ChatEvent): ChatEvent[] => {
  // dedupe: backlog replay after a reconnect may repeat seqs
  if (events.some((existing) => existing.seq === event.seq)) return events;
  let low = 0;
  let high = events.length;
  while (low < high) {
    const mid = (low + high) >> 1;
    const probe = events[mid];
    if (probe !== undefined && probe.seq < event.seq) low = mid + 1;
    else high = mid;
  }
  return [...events.slice(0, low), event, ...events.slice(low)];
};

const applyEvent = (state: ClientViewState, event: ChatEvent): ClientViewState => {
  const next: ClientViewState = { ...state, events: insertBySeq(state.events, event) };
  if (next.events === state.events) return state; // duplicate, nothing changed

  if (event.kind === 'settings_change') {
    // notices are always agent-authored, which doubles as name discovery
    next.agentName = event.author;
    if (state.pendingConfirmation && event.seq > state.pendingConfirmation.seq) {
      next.pendingConfirmation = null;
    }
  }

  if (
    event.kind === 'message' &&
    typeof event.text === 'string' &&
    CONFIRMATION_RE.test(event.text) &&
    (state.agentName === null || event.author === state.agentName) &&
    event.author !== state.self
  ) {
    next.pendingConfirmation = { seq: event.seq, prompt: event.text };
  }

  return next;
};

export const applyFrame = (state: ClientViewState, frame: ServerFrame): ClientViewState => {
  switch (frame.type) {
    case 'event':
      return applyEvent(state, frame.event);
    case 'settings_state':
      return { ...state, settings: frame.settings };
    case 'proposal_state':
      return { ...state, proposal: frame.proposal };
    case 'error': {
      const errors = [...state.errors, { error: frame.error, detail: frame.detail }];
      return { ...state, errors: errors.slice(-MAX_ERRORS) };
    }
  }
};

export const setConnection = (
  state: ClientViewState,
  connection: ConnectionState,
): ClientViewState => ({ ...state, connection });

export const setIdentity = (
  state: ClientViewState,
  self: string,
  room: string,
): ClientViewState => ({ ...state, self, room });

export const dismissConfirmation = (state: ClientViewState): ClientViewState =>
  state.pendingConfirmation === null ? state : { ...state, pendingConfirmation: null };

export const clearErrors = (state: ClientViewState): ClientViewState =>
  state.errors.length === 0 ? state : { ...state, errors: [] };

// who is typing right now, derived from the event stream
export const typingUsers = (state: ClientViewState): string[] => {
  const typing = new Set<string>();
  for (const event of state.events) {
    if (event.kind === 'typing_start') typing.add(event.author);
    else if (event.kind === 'typing_stop') typing.delete(event.author);
    else if (event.kind === 'message') typing.delete(event.author);
  }
  typing.delete(state.self ?? '');
  return [...typing].sort();
};
