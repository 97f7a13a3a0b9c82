// The client speaks newline-delimited JSON over any byte pipe. In the
// browser that pipe is a WebSocket bridged to the server's TCP port; in
// tests it is a raw net.Socket. Both reduce to this interface.

export interface Transport {
  send(data: string): void;
  close(): void;
  onData(handler: (chunk: string) => void): void;
  onClose(handler: () => void): void;
}

// Browser-side adapter. Expects a text-mode bridge (e.g. websockify) in
// front of the chat server; each ws message may carry any slice of the
// stream, so the caller still line-buffers.
export class WebSocketTransport implements Transport {
  private readonly socket: WebSocket;
  private dataHandler: ((chunk: string) => void) | null = null;
  private closeHandler: (() => void) | null = null;

  constructor(url: string) {
    this.socket = new WebSocket(url);
    this.socket.addEventListener('message', (ev) => {
      if (typeof ev.data === 'string') this.dataHandler?.(ev.data);
    });
    this.socket.addEventListener('close', () => this.closeHandler?.());
  }

  send(data: string): void {
    this.socket.send(data);
  }

  close(): void {
    this.socket.close();
  }

  onData(handler: (chunk: string) => void): void {
    this.dataHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }
}
