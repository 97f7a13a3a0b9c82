import { describe, expect, it } from 'vitest';

import type { AgentSettings, ChatEvent, ServerFrame } from '../src/protocol.js';
import {
  applyFrame,
  initialState,
  dismissConfirmation,
  setConnection,
  setIdentity,
  typingUsers,
  type ClientViewState,
} from '../src/state.js';

const event = (seq: number, extra: Partial<ChatEvent> = {}): ChatEvent => ({
  seq,
  ts_ms: seq * 1000,
  room: 'main',
  author: 'alice',
  kind: 'message',
  text: `post ${seq}`,
  ...extra,
});

const eventFrame = (seq: number, extra: Partial<ChatEvent> = {}): ServerFrame => ({
  type: 'event',
  event: event(seq, extra),
});

const feed = (state: ClientViewState, frames: ServerFrame[]): ClientViewState =>
  frames.reduce(applyFrame, state);

const SETTINGS = {
  mode: 'proactive',
  threshold: 'medium',
  placement: 'channel',
  long_message: { enabled: true, trigger_chars: 1000, preview_chars: 280 },
  rate: {
    initial_delay_ms: 0,
    hold_while_typing: true,
    max_posts_per_minute: 6,
    speak_first: false,
    consolidate_window_ms: 0,
  },
  style: { tone: 'neutral', min_reply_chars: null, max_reply_chars: null, bulleted_lists: false },
  governance: { policy: 'open', admins: [] },
  preset: null,
} as AgentSettings;

describe('event ordering', () => {
  it('keeps the event list in seq order regardless of arrival order', () => {
    const state = feed(initialState(), [eventFrame(3), eventFrame(1), eventFrame(2)]);
    expect(state.events.map((e) => e.seq)).toEqual([1, 2, 3]);
  });

  it('drops duplicate seqs (backlog replay after reconnect)', () => {
    const first = feed(initialState(), [eventFrame(1), eventFrame(2)]);
    const again = applyFrame(first, eventFrame(2, { text: 'mutated' }));
    expect(again).toBe(first);
    expect(again.events[1]?.text).toBe('post 2');
  });
});

describe('settings are server-owned', () => {
  it('starts with no settings and only settings_state ever sets them', () => {
    let state = feed(initialState(), [eventFrame(1), eventFrame(2)]);
    expect(state.settings).toBeNull();
    state = applyFrame(state, { type: 'settings_state', settings: SETTINGS });
    expect(state.settings?.threshold).toBe('medium');
    const settingsBefore = state.settings;
    state = applyFrame(state, eventFrame(3, { kind: 'settings_change', author: 'Nova' }));
    expect(state.settings).toBe(settingsBefore); // events never mutate settings
  });

  it('each settings_state replaces the whole snapshot', () => {
    let state = applyFrame(initialState(), { type: 'settings_state', settings: SETTINGS });
    state = applyFrame(state, {
      type: 'settings_state',
      settings: { ...SETTINGS, threshold: 'low' },
    });
    expect(state.settings?.threshold).toBe('low');
  });
});

describe('proposal tracking', () => {
  const body = { id: 'p1', yes: 1, no: 0, eligible: 2, state: 'open' as const };

  it('mirrors the latest proposal_state frame', () => {
    let state = applyFrame(initialState(), { type: 'proposal_state', proposal: body });
    expect(state.proposal?.state).toBe('open');
    state = applyFrame(state, {
      type: 'proposal_state',
      proposal: { ...body, yes: 2, state: 'applied' },
    });
    expect(state.proposal?.yes).toBe(2);
    expect(state.proposal?.state).toBe('applied');
    state = applyFrame(state, { type: 'proposal_state', proposal: null });
    expect(state.proposal).toBeNull();
  });
});

describe('inline errors', () => {
  it('accumulates error frames and keeps only the newest twenty', () => {
    let state = initialState();
    for (let i = 0; i < 25; i += 1) {
      state = applyFrame(state, { type: 'error', error: 'denied', detail: `attempt ${i}` });
    }
    expect(state.errors).toHaveLength(20);
    expect(state.errors[0]?.detail).toBe('attempt 5');
    expect(state.errors[19]?.detail).toBe('attempt 24');
  });
});

describe('pending confirmation', () => {
  const prompt =
    'Got it — change my settings to threshold: high? Reply yes to confirm.';

  it('arms on the agent prompt and clears on the settings notice', () => {
    let state = setIdentity(initialState(), 'alice', 'main');
    state = applyFrame(state, eventFrame(1, { author: 'Nova', text: prompt }));
    expect(state.pendingConfirmation?.seq).toBe(1);
    state = applyFrame(
      state,
      eventFrame(2, { author: 'Nova', kind: 'settings_change', text: 'settings: threshold: high' }),
    );
    expect(state.pendingConfirmation).toBeNull();
  });

  it('never arms on the user’s own messages', () => {
    let state = setIdentity(initialState(), 'alice', 'main');
    state = applyFrame(state, eventFrame(1, { author: 'alice', text: prompt }));
    expect(state.pendingConfirmation).toBeNull();
  });

  it('ignores prompts from non-agent authors once the agent is known', () => {
    let state = setIdentity(initialState(), 'alice', 'main');
    state = applyFrame(
      state,
      eventFrame(1, { author: 'Nova', kind: 'settings_change', text: 'settings: mode: reactive' }),
    );
    expect(state.agentName).toBe('Nova');
    state = applyFrame(state, eventFrame(2, { author: 'mallory', text: prompt }));
    expect(state.pendingConfirmation).toBeNull();
    state = applyFrame(state, eventFrame(3, { author: 'Nova', text: prompt }));
    expect(state.pendingConfirmation?.seq).toBe(3);
  });

  it('can be dismissed locally after replying no', () => {
    let state = setIdentity(initialState(), 'alice', 'main');
    state = applyFrame(state, eventFrame(1, { author: 'Nova', text: prompt }));
    state = dismissConfirmation(state);
    expect(state.pendingConfirmation).toBeNull();
  });
});

describe('typing indicator', () => {
  it('derives who is typing from start/stop/message events', () => {
    let state = setIdentity(initialState(), 'alice', 'main');
    state = feed(state, [
      eventFrame(1, { author: 'bob', kind: 'typing_start', text: undefined }),
      eventFrame(2, { author: 'carol', kind: 'typing_start', text: undefined }),
      eventFrame(3, { author: 'alice', kind: 'typing_start', text: undefined }),
    ]);
    expect(typingUsers(state)).toEqual(['bob', 'carol']); // self excluded
    state = applyFrame(state, eventFrame(4, { author: 'carol', kind: 'typing_stop', text: undefined }));
    expect(typingUsers(state)).toEqual(['bob']);
    state = applyFrame(state, eventFrame(5, { author: 'bob', text: 'done typing' }));
    expect(typingUsers(state)).toEqual([]);
  });
});

describe('connection bookkeeping', () => {
  it('setConnection and setIdentity update without touching events', () => {
    let state = feed(initialState(), [eventFrame(1)]);
    state = setConnection(state, 'connected');
    state = setIdentity(state, 'alice', 'main');
    expect(state.connection).toBe('connected');
    expect(state.self).toBe('alice');
    expect(state.room).toBe('main');
    expect(state.events).toHaveLength(1);
  });
});
