// Wire protocol: newline-delimited JSON frames, mirrored from the server.
// Nothing here is invented client-side; these shapes are the contract.

export type EventKind =
  | 'message'
  | 'reaction'
  | 'typing_start'
  | 'typing_stop'
  | 'join'
  | 'leave'
  | 'settings_change'
  | 'proposal'
  | 'vote';

export interface ChatEvent {
  seq: number;
  ts_ms: number;
  room: string;
  author: string;
  kind: EventKind;
  text?: string;
  thread_of?: number;
  emoji?: string;
  payload?: Record<string, unknown>;
}

export interface RatePolicy {
  initial_delay_ms: number;
  hold_while_typing: boolean;
  max_posts_per_minute: number;
  speak_first: boolean;
  consolidate_window_ms: number;
}

export interface StylePolicy {
  tone: string;
  min_reply_chars: number | null;
  max_reply_chars: number | null;
  bulleted_lists: boolean;
}

export interface LongMessagePolicy {
  enabled: boolean;
  trigger_chars: number;
  preview_chars: number;
}

export interface GovernancePolicy {
  policy: 'open' | 'admin' | 'vote';
  admins: string[];
}

export interface AgentSettings {
  mode: 'proactive' | 'reactive';
  threshold: 'high' | 'medium' | 'low';
  placement: 'channel' | 'thread';
  long_message: LongMessagePolicy;
  rate: RatePolicy;
  style: StylePolicy;
  governance: GovernancePolicy;
  preset: string | null;
}

export type SettingsPatch = Record<string, unknown>;

export interface EventFrame {
  type: 'event';
  event: ChatEvent;
}

export interface SettingsStateFrame {
  type: 'settings_state';
  settings: AgentSettings;
}

export interface ProposalStateBody {
  id: string;
  proposer?: string;
  patch?: SettingsPatch;
  yes: number;
  no: number;
  eligible: number;
  state: 'open' | 'applied' | 'rejected';
}

export interface ProposalStateFrame {
  type: 'proposal_state';
  proposal: ProposalStateBody | null;
}

export interface ErrorFrame {
  type: 'error';
  error: string;
  detail?: string;
}

export type ServerFrame =
  | EventFrame
  | SettingsStateFrame
  | ProposalStateFrame
  | ErrorFrame;

export type ClientFrame =
  | { type: 'hello'; name: string; room: string }
  | { type: 'post'; name: string; text: string; thread_of?: number }
  | { type: 'react'; name: string; emoji: string; thread_of: number }
  | { type: 'typing'; name: string; state: 'start' | 'stop' }
  | { type: 'settings_get'; name: string }
  | { type: 'settings_set'; name: string; patch: SettingsPatch }
  | { type: 'preset_apply'; name: string; preset: string }
  | { type: 'vote'; name: string; ballot: 'yes' | 'no'; proposal?: string };

const asRecord = (value: unknown): Record<string, unknown> | null =>
  value !== null && typeof value === 'object' && !Array.isArray(value)
    ? (value as Record<string, unknown>)
    : null;

const EVENT_KINDS: ReadonlySet<string> = new Set([
  'message', 'reaction', 'typing_start', 'typing_stop', 'join', 'leave',
  'settings_change', 'proposal', 'vote',
]);

const isChatEvent = (value: unknown): value is ChatEvent => {
  const record = asRecord(value);
  if (!record) return false;
  return (
    typeof record.seq === 'number' &&
    typeof record.ts_ms === 'number' &&
    typeof record.room === 'string' &&
    typeof record.author === 'string' &&
    typeof record.kind === 'string' &&
    EVENT_KINDS.has(record.kind)
  );
};

export const parseServerFrame = (line: string): ServerFrame => {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new Error(`unparseable frame: ${line.slice(0, 120)}`);
  }
  const record = asRecord(raw);
  if (!record || typeof record.type !== 'string') {
    throw new Error('frame is not an object with a type');
  }
  switch (record.type) {
    case 'event':
      if (!isChatEvent(record.event)) throw new Error('bad event frame');
      return { type: 'event', event: record.event };
    case 'settings_state': {
      const settings = asRecord(record.settings);
      if (!settings || typeof settings.mode !== 'string') {
        throw new Error('bad settings_state frame');
      }
      return { type: 'settings_state', settings: settings as unknown as AgentSettings };
    }
    case 'proposal_state': {
      if (record.proposal === null) return { type: 'proposal_state', proposal: null };
      const proposal = asRecord(record.proposal);
      if (!proposal || typeof proposal.id !== 'string') {
        throw new Error('bad proposal_state frame');
      }
      return {
        type: 'proposal_state',
        proposal: proposal as unknown as ProposalStateBody,
      };
    }
    case 'error':
      if (typeof record.error !== 'string') throw new Error('bad error frame');
      return {
        type: 'error',
        error: record.error,
        detail: typeof record.detail === 'string' ? record.detail : undefined,
      };
    default:
      throw new Error(`unknown server frame type: ${record.type}`);
  }
};

export const encodeClientFrame = (frame: ClientFrame): string =>
  JSON.stringify(frame) + '\n';
