// Model catalog from GET /models, expanded into the selectable pipeline
// variations (every ASR x LLM x TTS combination plus each e2e model).

import type { PipelineSelection } from './protocol.js';

export interface WorkerEntry {
  worker_id: string;
  models: string[];
  loaded_model: string | null;
  judge_metrics: string[];
}

export interface Catalog {
  tasks: Record<string, WorkerEntry[]>;
  variations: number;
}

export interface VariationChoice {
  label: string;
  config: PipelineSelection;
}

function modelsFor(catalog: Catalog, task: string): string[] {
  const entries = catalog.tasks[task] ?? [];
  return entries.flatMap((entry) => entry.models);
}

export function listVariations(catalog: Catalog): VariationChoice[] {
  const choices: VariationChoice[] = [];
  for (const asr of modelsFor(catalog, 'asr')) {
    for (const llm of modelsFor(catalog, 'llm')) {
      for (const tts of modelsFor(catalog, 'tts')) {
        choices.push({
          label: `cascaded: ${asr} + ${llm} + ${tts}`,
          config: { mode: 'cascaded', asr_model: asr, llm_model: llm, tts_model: tts },
        });
      }
    }
  }
  for (const e2e of modelsFor(catalog, 'e2e')) {
    choices.push({ label: `e2e: ${e2e}`, config: { mode: 'e2e', e2e_model: e2e } });
  }
  return choices;
}
