// Client-side audio plumbing: capture is downsampled to the wire rate and
// cut into small chunks; received response audio is queued with a bounded
// buffer so playback stays close to live and barge-in can flush instantly.

export const WIRE_RATE = 16000;
export const CAPTURE_CHUNK_MS = 60;
export const MAX_PLAYBACK_BUFFER_MS = 500;

export function downsampleToWireRate(input: Float32Array, srcRate: number): Float32Array {
  if (srcRate === WIRE_RATE) return Float32Array.from(input);
  if (srcRate < WIRE_RATE) throw new Error(`capture rate ${srcRate} below wire rate`);
  const ratio = srcRate / WIRE_RATE;
  const outLength = Math.floor(input.length / ratio);
  const out = new Float32Array(outLength);
  for (let i = 0; i < outLength; i++) {
    const pos = i * ratio;
    const left = Math.floor(pos);
    const right = Math.min(left + 1, input.length - 1);
    const frac = pos - left;
    out[i] = input[left] * (1 - frac) + input[right] * frac;
  }
  return out;
}

export function floatToPcm16(input: Float32Array): Int16Array {
  const out = new Int16Array(input.length);
  for (let i = 0; i < input.length; i++) {
    const clamped = Math.max(-1, Math.min(1, input[i]));
    out[i] = Math.round(clamped * 32767);
  }
  return out;
}

export function pcm16ToFloat(input: Int16Array): Float32Array<ArrayBuffer> {
  const out = new Float32Array(input.length);
  for (let i = 0; i < input.length; i++) out[i] = input[i] / 32768;
  return out;
}

/** Cuts a PCM stream into wire chunks of at most CAPTURE_CHUNK_MS. */
export class CaptureChunker {
  private pending: Int16Array = new Int16Array(0);
  readonly chunkSamples = (WIRE_RATE * CAPTURE_CHUNK_MS) / 1000;

  push(samples: Int16Array): Int16Array[] {
    const merged = new Int16Array(this.pending.length + samples.length);
    merged.set(this.pending);
    merged.set(samples, this.pending.length);
    const chunks: Int16Array[] = [];
    let offset = 0;
    while (merged.length - offset >= this.chunkSamples) {
      chunks.push(merged.slice(offset, offset + this.chunkSamples));
      offset += this.chunkSamples;
    }
    this.pending = merged.slice(offset);
    return chunks;
  }

  flush(): Int16Array | null {
    if (this.pending.length === 0) return null;
    const tail = this.pending;
    this.pending = new Int16Array(0);
    return tail;
  }
}

/**
 * Response-audio queue. Never holds more than MAX_PLAYBACK_BUFFER_MS: when
 * the producer runs ahead, the oldest samples are dropped so playback stays
 * near-live. flush() implements barge-in cancellation.
 */
export class PlaybackBuffer {
  private queue: Int16Array[] = [];
  private queuedSamples = 0;

  get bufferedMs(): number {
    return (this.queuedSamples / WIRE_RATE) * 1000;
  }

  enqueue(chunk: Int16Array): void {
    this.queue.push(chunk);
    this.queuedSamples += chunk.length;
    const maxSamples = (WIRE_RATE * MAX_PLAYBACK_BUFFER_MS) / 1000;
    while (this.queuedSamples > maxSamples && this.queue.length > 0) {
      const excess = this.queuedSamples - maxSamples;
      const head = this.queue[0];
      if (head.length <= excess) {
        this.queue.shift();
        this.queuedSamples -= head.length;
      } else {
        this.queue[0] = head.slice(excess);
        this.queuedSamples -= excess;
      }
    }
  }

  dequeue(samples: number): Int16Array {
    const out = new Int16Array(samples);
    let filled = 0;
    while (filled < samples && this.queue.length > 0) {
      const head = this.queue[0];
      const take = Math.min(head.length, samples - filled);
      out.set(head.subarray(0, take), filled);
      filled += take;
      if (take === head.length) {
        this.queue.shift();
      } else {
        this.queue[0] = head.slice(take);
      }
      this.queuedSamples -= take;
    }
    return out;
  }

  flush(): void {
    this.queue = [];
    this.queuedSamples = 0;
  }
}

export function bytesToPcm16(buffer: ArrayBuffer): Int16Array {
  return new Int16Array(buffer.slice(0));
}

export function pcm16ToBytes(samples: Int16Array): ArrayBuffer {
  return samples.buffer.slice(samples.byteOffset, samples.byteOffset + samples.byteLength) as ArrayBuffer;
}
