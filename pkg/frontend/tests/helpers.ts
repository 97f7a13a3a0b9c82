// Test-only plumbing: a Transport over a raw TCP socket plus a harness that
// spawns the real chat server as a subprocess. Only tests may import node
// builtins — src/ stays browser-safe.

import { spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync, writeFileSync } from 'node:fs';
import net from 'node:net';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import type { Transport } from '../src/transport.js';

export class NodeSocketTransport implements Transport {
  private dataHandler: ((chunk: string) => void) | null = null;
  private closeHandler: (() => void) | null = null;

  constructor(private readonly socket: net.Socket) {
    socket.setEncoding('utf8');
    socket.on('data', (chunk: string) => this.dataHandler?.(chunk));
    socket.on('close', () => this.closeHandler?.());
    socket.on('error', () => undefined);
  }

  send(data: string): void {
    this.socket.write(data);
  }

  close(): void {
    this.socket.end();
  }

  onData(handler: (chunk: string) => void): void {
    this.dataHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }
}

export const freePort = (): Promise<number> =>
  new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.listen(0, '127.0.0.1', () => {
      const address = probe.address();
      if (address === null || typeof address === 'string') {
        probe.close();
        reject(new Error('no port'));
        return;
      }
      const { port } = address;
      probe.close(() => resolve(port));
    });
    probe.on('error', reject);
  });

const connectOnce = (port: number): Promise<net.Socket> =>
  new Promise((resolve, reject) => {
    const socket = net.connect({ host: '127.0.0.1', port });
    socket.once('connect', () => resolve(socket));
    socket.once('error', reject);
  });

export const connectWithRetry = async (port: number, deadlineMs = 10_000): Promise<net.Socket> => {
  const start = Date.now();
  for (;;) {
    try {
      return await connectOnce(port);
    } catch (err) {
      if (Date.now() - start > deadlineMs) throw err;
      await sleep(100);
    }
  }
};

export const sleep = (ms: number): Promise<void> =>
  new Promise((resolve) => setTimeout(resolve, ms));

export const waitFor = async (
  predicate: () => boolean,
  what: string,
  deadlineMs = 8_000,
): Promise<void> => {
  const start = Date.now();
  while (!predicate()) {
    if (Date.now() - start > deadlineMs) throw new Error(`timed out waiting for ${what}`);
    await sleep(25);
  }
};

export interface ServerHandle {
  port: number;
  dir: string;
  stop: () => Promise<void>;
}

export interface ServerConfig {
  settings: Record<string, unknown>;
  script?: unknown[];
  agentName?: string;
}

export const startServer = async (config: ServerConfig): Promise<ServerHandle> => {
  const dir = mkdtempSync(join(tmpdir(), 'roundtable-web-'));
  const settingsPath = join(dir, 'settings.json');
  writeFileSync(settingsPath, JSON.stringify(config.settings));
  const scriptPath = join(dir, 'script.json');
  writeFileSync(scriptPath, JSON.stringify(config.script ?? []));
  const port = await freePort();

  const child: ChildProcess = spawn(
    'python3',
    [
      '-m', 'roundtable.cli', 'serve',
      '--bind', `127.0.0.1:${port}`,
      '--settings', settingsPath,
      '--provider', `scripted:${scriptPath}`,
      '--agent-name', config.agentName ?? 'Nova',
    ],
    { stdio: ['ignore', 'pipe', 'pipe'] },
  );
  const logs: string[] = [];
  child.stdout?.on('data', (chunk: Buffer) => logs.push(chunk.toString()));
  child.stderr?.on('data', (chunk: Buffer) => logs.push(chunk.toString()));

  try {
    const probe = await connectWithRetry(port);
    probe.destroy();
  } catch (err) {
    child.kill('SIGKILL');
    throw new Error(`server never came up: ${String(err)}\n${logs.join('')}`);
  }

  const stop = (): Promise<void> =>
    new Promise((resolve) => {
      child.once('exit', () => {
        rmSync(dir, { recursive: true, force: true });
        resolve();
      });
      child.kill('SIGTERM');
      setTimeout(() => child.kill('SIGKILL'), 2_000).unref();
    });

  return { port, dir, stop };
};

// canonical decision block the scripted provider rules emit; the reply key is
// suffix-matched server-side, so the agent name here just has to be plausible
export const decisionBlock = (value: number, reply: string): string =>
  JSON.stringify({
    source: 'scripted',
    target: 'chat',
    "Nova's reply": reply,
    value,
    decision: '<SUBMIT>',
  });
