// Wire types for the gateway's /ws/session endpoint. Text frames carry JSON
// control messages; binary frames are raw 16 kHz mono s16le PCM in both
// directions (mic upstream, response audio downstream).

export interface MetricValue {
  name: string;
  value: number | null;
  source: string;
  scope: string;
  status: string;
  detail?: string;
}

export type ServerMessage =
  | { type: 'vad_state'; state: 'speaking' | 'idle' }
  | { type: 'asr_text'; turn_id: number; text: string }
  | { type: 'response_text'; turn_id: number; text: string }
  | { type: 'turn_metrics'; turn_id: number; metrics: MetricValue[] }
  | { type: 'status'; status: 'loading' | 'ready' | 'error'; detail?: unknown; session_id?: string; turn_id?: number }
  | { type: 'session_expired' };

export interface VadSettings {
  frame_ms?: number;
  energy_floor_dbfs?: number;
  activation_ratio?: number;
  onset_frames?: number;
  hangover_frames?: number;
}

export interface PipelineSelection {
  mode: 'cascaded' | 'e2e';
  asr_model?: string;
  llm_model?: string;
  tts_model?: string;
  e2e_model?: string;
  vad?: VadSettings;
}

export type ClientMessage =
  | { type: 'select_config'; config: PipelineSelection; privacy_ack?: boolean }
  | { type: 'feedback'; turn_id: number; dimension: 'naturalness' | 'relevance'; level: number }
  | { type: 'end_session' };

const SERVER_TYPES = new Set([
  'vad_state',
  'asr_text',
  'response_text',
  'turn_metrics',
  'status',
  'session_expired',
]);

export function parseServerMessage(raw: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== 'object' || obj === null) return null;
  const type = (obj as { type?: unknown }).type;
  if (typeof type !== 'string' || !SERVER_TYPES.has(type)) return null;
  return obj as ServerMessage;
}

export function serializeClientMessage(message: ClientMessage): string {
  return JSON.stringify(message);
}

export const NATURALNESS_LABELS: Record<number, string> = {
  1: 'Very Natural',
  2: 'Somewhat Awkward',
  3: 'Unnatural',
  4: 'Very Awkward',
};

export const RELEVANCE_LABELS: Record<number, string> = {
  1: 'Highly Relevant',
  2: 'Partially Relevant',
  3: 'Slightly Irrelevant',
  4: 'Completely Irrelevant',
};
