// Canned microphone capture: one second of loud speech-band signal followed
// by 700 ms of silence, at the wire rate. Deterministic, so round-trip tests
// see the same transcript every run.

import { WIRE_RATE } from '../src/audio.js';

export function recordedUtterance(): Int16Array {
  const speech = Math.round(1.0 * WIRE_RATE);
  const silence = Math.round(0.7 * WIRE_RATE);
  const out = new Int16Array(speech + silence);
  for (let i = 0; i < speech; i++) {
    out[i] = Math.round(8000 * Math.sign(Math.sin((2 * Math.PI * 220 * i) / WIRE_RATE)) || 8000);
  }
  return out;
}

export function* wireChunks(samples: Int16Array, chunkMs = 100): Generator<ArrayBuffer> {
  const chunkSamples = (WIRE_RATE * chunkMs) / 1000;
  for (let offset = 0; offset < samples.length; offset += chunkSamples) {
    const chunk = samples.slice(offset, offset + chunkSamples);
    yield chunk.buffer.slice(chunk.byteOffset, chunk.byteOffset + chunk.byteLength) as ArrayBuffer;
  }
}
