// Browser entry point: binds RoomClient state to the page through the pure
// view models. One render pass per state change — the page is small enough
// that rebuilding the three panes beats bookkeeping incremental updates.

import { RoomClient } from './client.js';
import { WebSocketTransport } from './transport.js';
import { typingUsers, type ClientViewState } from './state.js';
import {
  expandTruncated,
  renderChat,
  renderRail,
  renderSettingsDialog,
  renderVoteBanner,
  type ChatItem,
} from './view.js';

const $ = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
};

const el = (tag: string, className: string, text?: string): HTMLElement => {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
};

// expansion of truncated previews is view-local; everything else re-derives
// from server state on each pass
const expanded = new Set<number>();

const renderItem = (client: RoomClient, item: ChatItem, depth: number): HTMLElement => {
  const event = item.event;
  const node = el('div', depth > 0 ? 'post threaded' : 'post');
  if (event.kind === 'join' || event.kind === 'leave') {
    node.append(el('span', 'presence', `${event.author} ${event.kind}ed`));
    return node;
  }
  if (item.isFullText && !expanded.has(event.seq)) {
    node.classList.add('hidden-full-text');
    return node;
  }
  node.append(el('span', 'author', event.author));
  node.append(el('span', 'text', event.text ?? ''));
  if (item.truncation) {
    const { fullSeq } = item.truncation;
    const button = el('button', 'expand', expanded.has(fullSeq) ? 'collapse' : 'show full text');
    button.addEventListener('click', () => {
      if (expanded.has(fullSeq)) expanded.delete(fullSeq);
      else expanded.add(fullSeq);
      render(client.state);
    });
    node.append(button);
    if (expanded.has(fullSeq)) {
      const full = expandTruncated(client.state, event.seq);
      if (full !== null) node.append(el('pre', 'full-text', full));
    }
  }
  if (item.reactions.length > 0) {
    const chips = el('div', 'chips');
    for (const chip of item.reactions) {
      chips.append(el('span', 'chip', `${chip.emoji} ${chip.by.length}`));
    }
    node.append(chips);
  }
  const reactButton = el('button', 'react', '+1');
  reactButton.addEventListener('click', () => client.react('thumbsup', event.seq));
  node.append(reactButton);
  const replyButton = el('button', 'reply', 'reply');
  replyButton.addEventListener('click', () => {
    const input = $('composer-text') as HTMLInputElement;
    input.dataset['threadOf'] = String(event.seq);
    input.placeholder = `replying to #${event.seq}`;
    input.focus();
  });
  node.append(replyButton);
  for (const reply of item.replies) node.append(renderItem(client, reply, depth + 1));
  return node;
};

const render = (state: ClientViewState): void => {
  const chat = $('chat');
  chat.replaceChildren();
  for (const item of renderChat(state)) chat.append(renderItem(client, item, 0));
  chat.scrollTop = chat.scrollHeight;

  const typing = typingUsers(state);
  $('typing').textContent = typing.length > 0 ? `${typing.join(', ')} typing…` : '';

  const rail = $('rail');
  rail.replaceChildren();
  for (const entry of renderRail(state)) {
    const node = el('div', `rail-item rail-${entry.kind}`);
    node.append(el('span', 'author', entry.author));
    node.append(el('span', 'text', entry.text));
    if (entry.kind === 'confirmation') {
      const yes = el('button', 'confirm-yes', 'yes');
      yes.addEventListener('click', () => client.post('yes'));
      const no = el('button', 'confirm-no', 'no');
      no.addEventListener('click', () => {
        client.post('no');
        client.dismissConfirmation();
      });
      node.append(yes, no);
    }
    rail.append(node);
  }

  const banner = $('banner');
  banner.replaceChildren();
  const vote = renderVoteBanner(state);
  if (vote) {
    banner.append(el('div', 'vote-title', `proposal by ${vote.proposedBy} — ${vote.state}`));
    for (const line of vote.diff) banner.append(el('div', 'vote-diff', line));
    banner.append(el('div', 'vote-tally', `yes ${vote.yes} / no ${vote.no} of ${vote.eligible}`));
    if (vote.canVote) {
      const yes = el('button', 'vote-yes', 'vote yes');
      yes.addEventListener('click', () => client.vote('yes', vote.proposalId));
      const no = el('button', 'vote-no', 'vote no');
      no.addEventListener('click', () => client.vote('no', vote.proposalId));
      banner.append(yes, no);
    }
  }

  const dialog = renderSettingsDialog(state.settings, state.connection);
  const settings = $('settings');
  settings.replaceChildren();
  for (const control of dialog.controls) {
    const row = el('label', 'control');
    row.append(el('span', 'control-label', control.label));
    if (control.kind === 'toggle') {
      const box = document.createElement('input');
      box.type = 'checkbox';
      box.checked = control.value === true;
      box.disabled = control.disabled;
      box.addEventListener('change', () => client.settingsSet(control.patchFor(box.checked)));
      row.append(box);
    } else {
      const select = document.createElement('select');
      select.disabled = control.disabled;
      for (const option of control.options ?? []) {
        const node = document.createElement('option');
        node.value = option.value;
        node.textContent = option.label;
        if (option.hint !== undefined) node.title = option.hint;
        node.selected = option.value === control.value;
        select.append(node);
      }
      select.addEventListener('change', () => client.settingsSet(control.patchFor(select.value)));
      row.append(select);
    }
    settings.append(row);
  }
  const presetRow = el('label', 'control');
  presetRow.append(el('span', 'control-label', 'Preset'));
  const presetSelect = document.createElement('select');
  presetSelect.disabled = dialog.readOnly;
  const blank = document.createElement('option');
  blank.value = '';
  blank.textContent = dialog.activePreset === null ? '(none)' : `(custom: ${dialog.activePreset})`;
  presetSelect.append(blank);
  for (const preset of dialog.presets) {
    const node = document.createElement('option');
    node.value = preset.value;
    node.textContent = preset.label;
    if (preset.hint !== undefined) node.title = preset.hint;
    node.selected = preset.value === dialog.activePreset;
    presetSelect.append(node);
  }
  presetSelect.addEventListener('change', () => {
    if (presetSelect.value !== '') client.presetApply(presetSelect.value);
  });
  presetRow.append(presetSelect);
  settings.append(presetRow);

  const errors = $('errors');
  errors.replaceChildren();
  for (const entry of state.errors.slice(-3)) {
    errors.append(el('div', 'error', `${entry.error}${entry.detail ? `: ${entry.detail}` : ''}`));
  }

  $('status').textContent = `${state.self ?? '?'} @ ${state.room ?? '?'} — ${state.connection}`;
};

const params = new URLSearchParams(window.location.search);
const name = params.get('name') ?? `guest-${Math.floor(Math.random() * 1000)}`;
const room = params.get('room') ?? 'main';
const url = params.get('ws') ?? `ws://${window.location.hostname}:8602`;

const client = new RoomClient(new WebSocketTransport(url), { name, room });
client.onChange(render);
client.hello();
client.settingsGet();

const composer = $('composer') as HTMLFormElement;
const composerText = $('composer-text') as HTMLInputElement;
let typingActive = false;
composerText.addEventListener('input', () => {
  const active = composerText.value.length > 0;
  if (active !== typingActive) {
    typingActive = active;
    client.typing(active);
  }
});
composer.addEventListener('submit', (ev) => {
  ev.preventDefault();
  const text = composerText.value.trim();
  if (text === '') return;
  const threadOf = composerText.dataset['threadOf'];
  client.post(text, threadOf === undefined ? undefined : Number(threadOf));
  composerText.value = '';
  delete composerText.dataset['threadOf'];
  composerText.placeholder = 'say something…';
  if (typingActive) {
    typingActive = false;
    client.typing(false);
  }
});

render(client.state);
