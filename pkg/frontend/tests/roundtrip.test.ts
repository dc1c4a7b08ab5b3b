// End-to-end console round-trip against the real gateway with mock workers:
// a canned microphone capture must produce a rendered transcript, response
// text, playable audio, and an acknowledged feedback rating; an e2e-mode
// session must leave the transcript box blank.

import { ChildProcess, spawn } from 'node:child_process';
import { createServer } from 'node:net';
import { fileURLToPath } from 'node:url';
import path from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import WebSocket from 'ws';

import { parseServerMessage, serializeClientMessage, ServerMessage } from '../src/protocol.js';
import {
  UiSessionState,
  initialState,
  latestTurn,
  reduce,
  reduceAudioChunk,
  responseBoxText,
  transcriptBoxText,
} from '../src/state.js';
import { recordedUtterance, wireChunks } from './fixture.js';

const REPO_ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), '..', '..');

let gateway: ChildProcess;
let httpPort: number;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer();
    server.listen(0, '127.0.0.1', () => {
      const address = server.address();
      if (typeof address === 'object' && address) {
        const port = address.port;
        server.close(() => resolve(port));
      } else {
        reject(new Error('no port'));
      }
    });
  });
}

async function waitForHealth(port: number, timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`http://127.0.0.1:${port}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error('gateway did not become healthy');
}

interface SessionRun {
  state: UiSessionState;
  feedbackAck: boolean;
}

function runSession(config: object, withFeedback: boolean): Promise<SessionRun> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(`ws://127.0.0.1:${httpPort}/ws/session`);
    ws.binaryType = 'arraybuffer';
    let state = initialState();
    let feedbackAck = false;
    let feedbackSent = false;
    const timer = setTimeout(() => {
      ws.close();
      reject(new Error('session timed out'));
    }, 20000);

    const finish = () => {
      clearTimeout(timer);
      ws.close();
      resolve({ state, feedbackAck });
    };

    ws.on('open', () => {
      ws.send(serializeClientMessage({ type: 'select_config', config: config as never }));
    });
    ws.on('error', (err) => {
      clearTimeout(timer);
      reject(err);
    });
    ws.on('message', (data, isBinary) => {
      if (isBinary) {
        const buffer = data as Buffer;
        state = reduceAudioChunk(state, buffer.byteLength);
        return;
      }
      const message = parseServerMessage(data.toString());
      if (!message) return;
      const before = state.connection;
      state = reduce(state, message);
      if (message.type === 'status' && message.status === 'ready' && before !== 'ready') {
        for (const chunk of wireChunks(recordedUtterance())) {
          ws.send(chunk);
        }
      }
      if (message.type === 'status' && (message as { detail?: unknown }).detail === 'feedback_recorded') {
        feedbackAck = true;
        finish();
        return;
      }
      if (message.type === 'turn_metrics') {
        if (withFeedback && !feedbackSent) {
          feedbackSent = true;
          ws.send(
            serializeClientMessage({
              type: 'feedback',
              turn_id: message.turn_id,
              dimension: 'naturalness',
              level: 1,
            })
          );
        } else {
          finish();
        }
      }
    });
  });
}

beforeAll(async () => {
  httpPort = await freePort();
  const workerPort = await freePort();
  gateway = spawn(
    'python3',
    [
      'scripts/run_gateway.py',
      '--mock-workers',
      '--http-port',
      String(httpPort),
      '--worker-port',
      String(workerPort),
      '--pace',
      '0',
    ],
    { cwd: REPO_ROOT, stdio: ['ignore', 'pipe', 'pipe'] }
  );
  await waitForHealth(httpPort);
}, 30000);

afterAll(() => {
  gateway?.kill('SIGTERM');
});

describe('console round-trip against the live gateway', () => {
  it('cascaded: transcript, response, playable audio, feedback delivered', async () => {
    const run = await runSession(
      {
        mode: 'cascaded',
        asr_model: 'echo-asr-v1',
        llm_model: 'template-llm-v1',
        tts_model: 'tone-tts-v1',
      },
      true
    );
    const turn = latestTurn(run.state)!;
    expect(transcriptBoxText(turn)).toBe('mock transcript 1.00s');
    expect(responseBoxText(turn)).toBe('echo: mock transcript 1.00s');
    expect(turn.audioBytes).toBeGreaterThan(0);
    expect(turn.audioBytes).toBe(1.5 * 16000 * 2); // full tone received
    expect(run.state.metricsByTurn[turn.turnId]?.length).toBeGreaterThan(0);
    expect(run.feedbackAck).toBe(true);
  }, 30000);

  it('e2e: transcript box renders blank', async () => {
    const run = await runSession({ mode: 'e2e', e2e_model: 'mock-e2e-v1' }, false);
    const turn = latestTurn(run.state)!;
    expect(turn.asrText).toBeNull();
    expect(transcriptBoxText(turn)).toBe('');
    expect(responseBoxText(turn)).toBe('mock response 1.00s');
    expect(turn.audioBytes).toBeGreaterThan(0);
  }, 30000);

  it('model selector catalog matches GET /models', async () => {
    const response = await fetch(`http://127.0.0.1:${httpPort}/models`);
    const catalog = await response.json();
    const { listVariations } = await import('../src/catalog.js');
    expect(listVariations(catalog).length).toBe(catalog.variations);
  });
});
