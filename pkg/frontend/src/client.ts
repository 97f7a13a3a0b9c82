// RoomClient: one persistent connection, one state store, one change feed.
// All UI intents funnel through the typed send methods below; all server
// truth funnels back through applyFrame. Nothing else touches the state.

import { LineDecoder } from './framing.js';
import {
  encodeClientFrame,
  parseServerFrame,
  type ClientFrame,
  type ServerFrame,
  type SettingsPatch,
} from './protocol.js';
import {
  applyFrame,
  initialState,
  dismissConfirmation,
  setConnection,
  setIdentity,
  type ClientViewState,
} from './state.js';
import type { Transport } from './transport.js';

export interface RoomClientOptions {
  name: string;
  room: string;
}

type Listener = (state: ClientViewState) => void;

export class RoomClient {
  private _state: ClientViewState;
  private readonly decoder = new LineDecoder();
  private readonly listeners: Listener[] = [];

  constructor(
    private readonly transport: Transport,
    private readonly options: RoomClientOptions,
  ) {
    this._state = setIdentity(initialState(), options.name, options.room);
    transport.onData((chunk) => this.onChunk(chunk));
    transport.onClose(() => this.update(setConnection(this._state, 'closed')));
  }

  get state(): ClientViewState {
    return this._state;
  }

  onChange(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      const at = this.listeners.indexOf(listener);
      if (at >= 0) this.listeners.splice(at, 1);
    };
  }

  private update(next: ClientViewState): void {
    if (next === this._state) return;
    this._state = next;
    for (const listener of [...this.listeners]) listener(next);
  }

  private onChunk(chunk: string): void {
    for (const line of this.decoder.push(chunk)) {
      let frame: ServerFrame;
      try {
        frame = parseServerFrame(line);
      } catch {
        continue; // a hostile or garbled line must not take the UI down
      }
      let next = applyFrame(this._state, frame);
      if (
        frame.type === 'event' &&
        frame.event.kind === 'join' &&
        frame.event.author === this.options.name &&
        next.connection !== 'connected'
      ) {
        next = setConnection(next, 'connected');
      }
      this.update(next);
    }
  }

  private send(frame: ClientFrame): void {
    this.transport.send(encodeClientFrame(frame));
  }

  // -- session -------------------------------------------------------------

  hello(): void {
    this.update(setConnection(this._state, 'connecting'));
    this.send({ type: 'hello', name: this.options.name, room: this.options.room });
  }

  disconnect(): void {
    this.transport.close();
  }

  // -- chat ----------------------------------------------------------------

  post(text: string, threadOf?: number): void {
    this.send({
      type: 'post',
      name: this.options.name,
      text,
      ...(threadOf === undefined ? {} : { thread_of: threadOf }),
    });
  }

  react(emoji: string, threadOf: number): void {
    this.send({ type: 'react', name: this.options.name, emoji, thread_of: threadOf });
  }

  typing(active: boolean): void {
    this.send({ type: 'typing', name: this.options.name, state: active ? 'start' : 'stop' });
  }

  // -- settings ------------------------------------------------------------

  settingsGet(): void {
    this.send({ type: 'settings_get', name: this.options.name });
  }

  settingsSet(patch: SettingsPatch): void {
    this.send({ type: 'settings_set', name: this.options.name, patch });
  }

  presetApply(preset: string): void {
    this.send({ type: 'preset_apply', name: this.options.name, preset });
  }

  vote(ballot: 'yes' | 'no', proposal?: string): void {
    this.send({
      type: 'vote',
      name: this.options.name,
      ballot,
      ...(proposal === undefined ? {} : { proposal }),
    });
  }

  // replying "no" in chat is the real decline; this just clears the card
  dismissConfirmation(): void {
    this.update(dismissConfirmation(this._state));
  }
}
