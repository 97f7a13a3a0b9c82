// Pure view models. Everything here is a function of ClientViewState —
// no sockets, no DOM, so the whole layer is trivially testable.

import type { AgentSettings, ChatEvent, SettingsPatch } from './protocol.js';
import type { ClientViewState, ConnectionState } from './state.js';

// ---------------------------------------------------------------------------
// chat column

export interface ReactionChip {
  emoji: string;
  by: string[];
}

export interface ChatItem {
  event: ChatEvent;
  replies: ChatItem[];
  reactions: ReactionChip[];
  // set on preview posts of truncated messages; points at the threaded full text
  truncation: { fullSeq: number } | null;
  // true on the threaded full-text post itself, so the default render can fold
  // it behind the preview's expand affordance instead of showing it twice
  isFullText: boolean;
}

const RAIL_KINDS = new Set<string>(['settings_change', 'proposal', 'vote']);

const truncationOf = (event: ChatEvent): { fullSeq: number } | null => {
  if (event.kind !== 'message' || !event.payload) return null;
  const payload = event.payload;
  if (payload['truncated'] !== true) return null;
  const fullSeq = payload['full_seq'];
  return typeof fullSeq === 'number' ? { fullSeq } : null;
};

export const renderChat = (state: ClientViewState): ChatItem[] => {
  const items = new Map<number, ChatItem>();
  const roots: ChatItem[] = [];
  const fullSeqs = new Set<number>();

  for (const event of state.events) {
    const truncation = truncationOf(event);
    if (truncation) fullSeqs.add(truncation.fullSeq);
  }

  for (const event of state.events) {
    if (RAIL_KINDS.has(event.kind)) continue; // side rail, not the chat column
    if (event.kind === 'reaction') {
      const target = event.thread_of === undefined ? undefined : items.get(event.thread_of);
      const emoji = event.emoji ?? '?';
      if (target) {
        const chip = target.reactions.find((r) => r.emoji === emoji);
        if (chip) chip.by.push(event.author);
        else target.reactions.push({ emoji, by: [event.author] });
      }
      continue;
    }
    if (event.kind !== 'message' && event.kind !== 'join' && event.kind !== 'leave') {
      continue; // typing churn never lands in the transcript column
    }
    const item: ChatItem = {
      event,
      replies: [],
      reactions: [],
      truncation: truncationOf(event),
      isFullText: fullSeqs.has(event.seq),
    };
    items.set(event.seq, item);
    const parent = event.thread_of === undefined ? undefined : items.get(event.thread_of);
    if (parent) parent.replies.push(item);
    else roots.push(item);
  }
  return roots;
};

// the expand affordance: byte-identical full text for a truncated preview
export const expandTruncated = (state: ClientViewState, previewSeq: number): string | null => {
  const preview = state.events.find((e) => e.seq === previewSeq);
  if (!preview) return null;
  const truncation = truncationOf(preview);
  if (!truncation) return null;
  const full = state.events.find((e) => e.seq === truncation.fullSeq);
  return full && typeof full.text === 'string' ? full.text : null;
};

// ---------------------------------------------------------------------------
// settings-control side rail

export type RailKind = 'notice' | 'proposal' | 'vote' | 'confirmation';

export interface RailItem {
  kind: RailKind;
  seq: number;
  text: string;
  author: string;
}

export const renderRail = (state: ClientViewState): RailItem[] => {
  const rail: RailItem[] = [];
  for (const event of state.events) {
    if (!RAIL_KINDS.has(event.kind)) continue;
    let text = event.text ?? '';
    if (event.kind === 'vote') {
      const ballot = event.payload?.['ballot'];
      text = typeof ballot === 'string' ? `voted ${ballot}` : 'voted';
    }
    rail.push({
      kind: event.kind === 'settings_change' ? 'notice' : (event.kind as RailKind),
      seq: event.seq,
      text,
      author: event.author,
    });
  }
  if (state.pendingConfirmation) {
    rail.push({
      kind: 'confirmation',
      seq: state.pendingConfirmation.seq,
      text: state.pendingConfirmation.prompt,
      author: state.agentName ?? 'agent',
    });
  }
  return rail.sort((a, b) => a.seq - b.seq);
};

// ---------------------------------------------------------------------------
// settings dialog

export interface SelectOption {
  value: string;
  label: string;
  hint?: string;
}

export interface DialogControl {
  id: string;
  label: string;
  kind: 'toggle' | 'select';
  value: string | boolean;
  options?: SelectOption[];
  disabled: boolean;
  // maps a user edit on this control to the settings_set patch to emit
  patchFor: (value: string | boolean) => SettingsPatch;
}

export interface SettingsDialogModel {
  readOnly: boolean;
  controls: DialogControl[];
  presets: SelectOption[];
  activePreset: string | null;
}

export const THRESHOLD_OPTIONS: SelectOption[] = [
  { value: 'high', label: 'High', hint: 'speak only when very confident (90)' },
  { value: 'medium', label: 'Medium', hint: 'balanced participation (75)' },
  { value: 'low', label: 'Low', hint: 'chime in freely (50)' },
];

export const PRESET_OPTIONS: SelectOption[] = [
  { value: 'scribe', label: 'Scribe', hint: 'quiet note-taker, consolidates ideas' },
  { value: 'facilitator', label: 'Facilitator', hint: 'keeps discussion moving' },
  { value: 'summarizer', label: 'Summarizer', hint: 'high-bar summary contributions' },
  { value: 'brainstormer', label: 'Brainstormer', hint: 'eager idea generation' },
];

export const renderSettingsDialog = (
  settings: AgentSettings | null,
  connection: ConnectionState,
): SettingsDialogModel => {
  const readOnly = connection !== 'connected' || settings === null;
  if (settings === null) {
    return { readOnly: true, controls: [], presets: PRESET_OPTIONS, activePreset: null };
  }
  const controls: DialogControl[] = [
    {
      id: 'mode',
      label: 'Participation mode',
      kind: 'toggle',
      value: settings.mode === 'proactive',
      disabled: readOnly,
      patchFor: (value) => ({ mode: value === true ? 'proactive' : 'reactive' }),
    },
    {
      id: 'threshold',
      label: 'Confidence threshold',
      kind: 'select',
      value: settings.threshold,
      options: THRESHOLD_OPTIONS,
      disabled: readOnly,
      patchFor: (value) => ({ threshold: String(value) }),
    },
    {
      id: 'placement',
      label: 'Reply placement',
      kind: 'select',
      value: settings.placement,
      options: [
        { value: 'channel', label: 'In channel' },
        { value: 'thread', label: 'In threads' },
      ],
      disabled: readOnly,
      patchFor: (value) => ({ placement: String(value) }),
    },
    {
      id: 'long_message',
      label: 'Truncate long messages',
      kind: 'toggle',
      value: settings.long_message.enabled,
      disabled: readOnly,
      patchFor: (value) => ({ long_message: { enabled: value === true } }),
    },
  ];
  return { readOnly, controls, presets: PRESET_OPTIONS, activePreset: settings.preset };
};

// ---------------------------------------------------------------------------
// vote banner

export const describePatch = (patch: SettingsPatch): string[] => {
  const lines: string[] = [];
  const walk = (prefix: string, value: unknown): void => {
    if (value !== null && typeof value === 'object' && !Array.isArray(value)) {
      for (const [key, child] of Object.entries(value as Record<string, unknown>)) {
        walk(prefix ? `${prefix}.${key}` : key, child);
      }
      return;
    }
    lines.push(`${prefix} -> ${JSON.stringify(value)}`);
  };
  walk('', patch);
  return lines;
};

export interface VoteBannerModel {
  proposalId: string;
  proposedBy: string;
  diff: string[];
  yes: number;
  no: number;
  eligible: number;
  state: 'open' | 'applied' | 'rejected';
  canVote: boolean;
}

export const renderVoteBanner = (state: ClientViewState): VoteBannerModel | null => {
  const proposal = state.proposal;
  if (proposal === null) return null;
  // tally and outcome are authoritative from the proposal_state frame; the
  // patch itself rides on the proposal event, so join the two by id
  let patch: SettingsPatch | undefined = proposal.patch;
  let proposedBy = proposal.proposer;
  if (patch === undefined || proposedBy === undefined) {
    for (const event of state.events) {
      if (event.kind !== 'proposal' || event.payload?.['id'] !== proposal.id) continue;
      const eventPatch = event.payload?.['patch'];
      if (patch === undefined && eventPatch !== null && typeof eventPatch === 'object') {
        patch = eventPatch as SettingsPatch;
      }
      if (proposedBy === undefined) proposedBy = event.author;
    }
  }
  return {
    proposalId: proposal.id,
    proposedBy: proposedBy ?? '?',
    diff: patch === undefined ? [] : describePatch(patch),
    yes: proposal.yes,
    no: proposal.no,
    eligible: proposal.eligible,
    state: proposal.state,
    canVote: proposal.state === 'open' && state.connection === 'connected',
  };
};
