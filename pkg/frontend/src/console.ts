// DOM wiring for the conversation console: microphone capture streaming to
// the gateway, transcript/response boxes, audio playback with barge-in
// handling, per-turn metric panel, and 4-point feedback buttons.

import {
  CAPTURE_CHUNK_MS,
  CaptureChunker,
  PlaybackBuffer,
  WIRE_RATE,
  bytesToPcm16,
  downsampleToWireRate,
  floatToPcm16,
  pcm16ToBytes,
  pcm16ToFloat,
} from './audio.js';
import { Catalog, listVariations } from './catalog.js';
import {
  NATURALNESS_LABELS,
  RELEVANCE_LABELS,
  parseServerMessage,
  serializeClientMessage,
} from './protocol.js';
import {
  UiSessionState,
  initialState,
  latestTurn,
  reduce,
  reduceAudioChunk,
  responseBoxText,
  transcriptBoxText,
} from './state.js';

const CAPTURE_WORKLET = `
class CaptureProcessor extends AudioWorkletProcessor {
  process(inputs) {
    const channel = inputs[0] && inputs[0][0];
    if (channel && channel.length) {
      const copy = new Float32Array(channel.length);
      copy.set(channel);
      this.port.postMessage(copy, [copy.buffer]);
    }
    return true;
  }
}
registerProcessor('capture-processor', CaptureProcessor);
`;

export class ConsoleApp {
  private state: UiSessionState = initialState();
  private ws: WebSocket | null = null;
  private playback = new PlaybackBuffer();
  private chunker = new CaptureChunker();
  private audioContext: AudioContext | null = null;
  private playing = false;

  constructor(private root: Document, private baseUrl: string) {}

  private el<T extends HTMLElement>(id: string): T {
    const node = this.root.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  }

  async start(): Promise<void> {
    await this.populateSelector();
    this.el<HTMLButtonElement>('connect').addEventListener('click', () => {
      void this.connect();
    });
    this.buildFeedbackButtons();
  }

  private async populateSelector(): Promise<void> {
    const response = await fetch(`${this.baseUrl}/models`);
    const catalog = (await response.json()) as Catalog;
    const selector = this.el<HTMLSelectElement>('variation');
    selector.innerHTML = '';
    for (const choice of listVariations(catalog)) {
      const option = this.root.createElement('option');
      option.value = JSON.stringify(choice.config);
      option.textContent = choice.label;
      selector.appendChild(option);
    }
  }

  private buildFeedbackButtons(): void {
    const panel = this.el<HTMLDivElement>('feedback');
    panel.innerHTML = '';
    const scales: Array<['naturalness' | 'relevance', Record<number, string>]> = [
      ['naturalness', NATURALNESS_LABELS],
      ['relevance', RELEVANCE_LABELS],
    ];
    for (const [dimension, labels] of scales) {
      for (const level of [1, 2, 3, 4]) {
        const button = this.root.createElement('button');
        button.textContent = labels[level];
        button.addEventListener('click', () => this.submitFeedback(dimension, level));
        panel.appendChild(button);
      }
    }
  }

  private submitFeedback(dimension: 'naturalness' | 'relevance', level: number): void {
    const turn = latestTurn(this.state);
    if (!turn || !this.ws) return;
    this.ws.send(
      serializeClientMessage({ type: 'feedback', turn_id: turn.turnId, dimension, level })
    );
  }

  private async connect(): Promise<void> {
    const wsUrl = this.baseUrl.replace(/^http/, 'ws') + '/ws/session';
    const ws = new WebSocket(wsUrl);
    ws.binaryType = 'arraybuffer';
    this.ws = ws;
    ws.addEventListener('open', () => {
      const config = JSON.parse(this.el<HTMLSelectElement>('variation').value);
      ws.send(serializeClientMessage({ type: 'select_config', config }));
    });
    ws.addEventListener('message', (event) => this.onMessage(event));
    ws.addEventListener('close', () => this.onExpired());
    await this.startCapture();
    void this.runPlayback();
  }

  private onMessage(event: MessageEvent): void {
    if (typeof event.data === 'string') {
      const message = parseServerMessage(event.data);
      if (!message) {
        console.warn('ignoring unknown message', event.data);
        return;
      }
      const wasSpeaking = this.state.liveVad;
      this.state = reduce(this.state, message);
      // user talking over playback: drop everything still buffered
      if (message.type === 'vad_state' && message.state === 'speaking' && wasSpeaking === 'idle') {
        this.playback.flush();
      }
      if (message.type === 'session_expired') this.onExpired();
      this.render();
      return;
    }
    const pcm = bytesToPcm16(event.data as ArrayBuffer);
    this.playback.enqueue(pcm);
    this.state = reduceAudioChunk(this.state, pcm.byteLength);
    this.render();
  }

  private async startCapture(): Promise<void> {
    let stream: MediaStream;
    try {
      stream = await navigator.mediaDevices.getUserMedia({ audio: true, video: false });
    } catch {
      this.el<HTMLDivElement>('banner').textContent = 'microphone permission denied';
      throw new Error('PermissionDenied');
    }
    const context = new AudioContext();
    this.audioContext = context;
    const blob = new Blob([CAPTURE_WORKLET], { type: 'application/javascript' });
    await context.audioWorklet.addModule(URL.createObjectURL(blob));
    const source = context.createMediaStreamSource(stream);
    const node = new AudioWorkletNode(context, 'capture-processor');
    node.port.onmessage = (event: MessageEvent<Float32Array>) => {
      // capture keeps flowing during playback so the server can see barge-in
      const resampled = downsampleToWireRate(event.data, context.sampleRate);
      for (const chunk of this.chunker.push(floatToPcm16(resampled))) {
        if (this.ws && this.ws.readyState === WebSocket.OPEN) {
          this.ws.send(pcm16ToBytes(chunk));
        }
      }
    };
    source.connect(node);
  }

  private async runPlayback(): Promise<void> {
    if (this.playing || !this.audioContext) return;
    this.playing = true;
    const context = this.audioContext;
    const frame = WIRE_RATE / 10;
    const tick = async () => {
      if (!this.playing) return;
      if (this.playback.bufferedMs > 0) {
        const pcm = this.playback.dequeue(frame);
        const buffer = context.createBuffer(1, pcm.length, WIRE_RATE);
        buffer.copyToChannel(pcm16ToFloat(pcm), 0);
        const node = context.createBufferSource();
        node.buffer = buffer;
        node.connect(context.destination);
        node.start();
      }
      setTimeout(tick, 100);
    };
    await tick();
  }

  private onExpired(): void {
    this.playing = false;
    this.el<HTMLDivElement>('banner').textContent = 'session expired, interface refreshes';
    // fresh session on expiry, mirroring the 5-minute refresh behavior
    setTimeout(() => {
      this.state = initialState();
      void this.connect();
    }, 1000);
  }

  private render(): void {
    const turn = latestTurn(this.state);
    this.el<HTMLDivElement>('transcript').textContent = this.state.outputsHidden
      ? ''
      : transcriptBoxText(turn);
    this.el<HTMLDivElement>('response').textContent = this.state.outputsHidden
      ? ''
      : responseBoxText(turn);
    this.el<HTMLDivElement>('vad').textContent = this.state.liveVad;
    this.el<HTMLDivElement>('status').textContent = this.state.connection;
    const metrics = turn ? this.state.metricsByTurn[turn.turnId] ?? [] : [];
    this.el<HTMLDivElement>('metrics').textContent = metrics
      .map((m) => `${m.name}=${m.value ?? m.status}`)
      .join('  ');
  }
}

export function boot(): void {
  const app = new ConsoleApp(document, window.location.origin);
  void app.start();
}
