// Byte stream -> complete lines. TCP gives no message boundaries, so the
// decoder buffers partial lines across chunks and yields one string per frame.

export class LineDecoder {
  private buffer = '';

  push(chunk: string): string[] {
    this.buffer += chunk;
    const lines: string[] = [];
    for (;;) {
      const index = this.buffer.indexOf('\n');
      if (index < 0) break;
      const line = this.buffer.slice(0, index).trim();
      this.buffer = this.buffer.slice(index + 1);
      if (line.length > 0) lines.push(line);
    }
    return lines;
  }

  pending(): string {
    return this.buffer;
  }
}
