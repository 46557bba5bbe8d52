/**
 * Server-sent-event parsing and a resumable stream consumer.
 *
 * The parser is incremental: feed it raw chunks in any split, it yields
 * complete events. The consumer remembers the last seq it delivered, so a
 * reconnect at `cursor` loses nothing.
 */

import type { SessionEvent } from './types.js';

export class SseParser {
  private buffer = '';

  feed(chunk: string): SessionEvent[] {
    this.buffer += chunk;
    const events: SessionEvent[] = [];
    let split: number;
    while ((split = this.buffer.indexOf('\n\n')) !== -1) {
      const block = this.buffer.slice(0, split);
      this.buffer = this.buffer.slice(split + 2);
      const data = block
        .split('\n')
        .filter((line) => line.startsWith('data: '))
        .map((line) => line.slice('data: '.length))
        .join('\n');
      if (data) {
        events.push(JSON.parse(data) as SessionEvent);
      }
    }
    return events;
  }
}

export interface StreamTransport {
  /** Open a stream of raw text chunks starting after `fromSeq`. */
  open(fromSeq: number): AsyncIterable<string>;
}

export class EventStream {
  cursor = 0;

  constructor(
    private transport: StreamTransport,
    private onEvent: (event: SessionEvent) => void,
  ) {}

  /** Consume one connection; returns when the transport ends. */
  async run(): Promise<void> {
    const parser = new SseParser();
    for await (const chunk of this.transport.open(this.cursor)) {
      for (const event of parser.feed(chunk)) {
        if (event.seq <= this.cursor) continue;
        this.cursor = event.seq;
        this.onEvent(event);
      }
    }
  }

  /** Keep reconnecting (resuming at the cursor) until stopped. */
  async runForever(retryDelayMs = 1000, stopped?: () => boolean): Promise<void> {
    for (;;) {
      if (stopped?.()) return;
      try {
        await this.run();
      } catch {
        // transport error: fall through to retry
      }
      if (stopped?.()) return;
      await new Promise((resolve) => setTimeout(resolve, retryDelayMs));
    }
  }
}
