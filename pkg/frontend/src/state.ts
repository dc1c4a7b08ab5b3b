// Pure session-state reducer: feed it server messages (and audio chunk
// sizes) in arrival order, render from the result. Keeping this free of DOM
// access makes the console's behavior testable in node.

import type { MetricValue, ServerMessage } from './protocol.js';

export type ConnectionState = 'connecting' | 'ready' | 'loading_model' | 'expired';

export interface TurnView {
  turnId: number;
  asrText: string | null;
  responseText: string;
  audioBytes: number;
  metrics: MetricValue[];
}

export interface UiSessionState {
  connection: ConnectionState;
  liveVad: 'speaking' | 'idle';
  turns: TurnView[];
  metricsByTurn: Record<number, MetricValue[]>;
  conversationMetrics: MetricValue[];
  outputsHidden: boolean;
  lastError: string | null;
  sessionId: string | null;
}

export function initialState(): UiSessionState {
  return {
    connection: 'connecting',
    liveVad: 'idle',
    turns: [],
    metricsByTurn: {},
    conversationMetrics: [],
    outputsHidden: false,
    lastError: null,
    sessionId: null,
  };
}

function upsertTurn(state: UiSessionState, turnId: number): TurnView {
  let turn = state.turns.find((t) => t.turnId === turnId);
  if (!turn) {
    turn = { turnId, asrText: null, responseText: '', audioBytes: 0, metrics: [] };
    state.turns.push(turn);
    state.turns.sort((a, b) => a.turnId - b.turnId);
  }
  return turn;
}

export function reduce(previous: UiSessionState, message: ServerMessage): UiSessionState {
  const state: UiSessionState = {
    ...previous,
    turns: previous.turns.map((t) => ({ ...t, metrics: [...t.metrics] })),
    metricsByTurn: { ...previous.metricsByTurn },
    conversationMetrics: [...previous.conversationMetrics],
  };
  switch (message.type) {
    case 'vad_state':
      state.liveVad = message.state;
      break;
    case 'asr_text':
      upsertTurn(state, message.turn_id).asrText = message.text;
      break;
    case 'response_text':
      upsertTurn(state, message.turn_id).responseText = message.text;
      break;
    case 'turn_metrics': {
      const turnScoped = message.metrics.filter((m) => m.scope.startsWith('turn:'));
      const conversationScoped = message.metrics.filter((m) => m.scope === 'conversation');
      const turn = upsertTurn(state, message.turn_id);
      turn.metrics = turnScoped;
      state.metricsByTurn[message.turn_id] = turnScoped;
      if (conversationScoped.length > 0) state.conversationMetrics = conversationScoped;
      break;
    }
    case 'status':
      if (message.status === 'loading') {
        state.connection = 'loading_model';
        state.outputsHidden = true;
      } else if (message.status === 'ready') {
        state.connection = 'ready';
        state.outputsHidden = false;
        if (message.session_id) state.sessionId = message.session_id;
      } else {
        state.lastError = String(message.detail ?? 'error');
      }
      break;
    case 'session_expired':
      state.connection = 'expired';
      break;
  }
  return state;
}

export function reduceAudioChunk(previous: UiSessionState, byteLength: number): UiSessionState {
  const state = reduce(previous, { type: 'vad_state', state: previous.liveVad });
  const current = state.turns[state.turns.length - 1];
  if (current) current.audioBytes += byteLength;
  return state;
}

/** Transcript box content; blank for turns without a transcript (e2e). */
export function transcriptBoxText(turn: TurnView | undefined): string {
  if (!turn || turn.asrText === null) return '';
  return turn.asrText;
}

export function responseBoxText(turn: TurnView | undefined): string {
  return turn ? turn.responseText : '';
}

export function latestTurn(state: UiSessionState): TurnView | undefined {
  return state.turns[state.turns.length - 1];
}
