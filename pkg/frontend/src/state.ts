// Pure view state for the chat window; the UI layer only renders this.

import type { MessageOut } from "./api";

export interface Provenance {
  entity: string;
  relations: string[];
  objects: string[];
  intermediate: string;
  lowConfidence: boolean;
}

export interface TranscriptEntry {
  speaker: "user" | "system";
  text: string;
  provenance?: Provenance;
}

export interface ChatViewState {
  sessionId: string | null;
  transcript: TranscriptEntry[];
  pending: boolean;
  showIntermediate: boolean;
  error: string | null;
}

export function initialState(): ChatViewState {
  return {
    sessionId: null,
    transcript: [],
    pending: false,
    showIntermediate: false,
    error: null,
  };
}

export function sessionStarted(state: ChatViewState, sessionId: string): ChatViewState {
  return { ...initialState(), sessionId, showIntermediate: state.showIntermediate };
}

export function userSent(state: ChatViewState, text: string): ChatViewState {
  return {
    ...state,
    pending: true,
    error: null,
    transcript: [...state.transcript, { speaker: "user", text }],
  };
}

export function systemReplied(state: ChatViewState, msg: MessageOut): ChatViewState {
  const entry: TranscriptEntry = {
    speaker: "system",
    text: msg.response,
    provenance: {
      entity: msg.entity,
      relations: msg.relations,
      objects: msg.objects,
      intermediate: msg.intermediate,
      lowConfidence: msg.low_confidence,
    },
  };
  return { ...state, pending: false, transcript: [...state.transcript, entry] };
}

export function failed(state: ChatViewState, message: string): ChatViewState {
  return { ...state, pending: false, error: message };
}

export function toggledIntermediate(state: ChatViewState): ChatViewState {
  return { ...state, showIntermediate: !state.showIntermediate };
}

// Text shown for one entry given the surface/intermediate toggle.
export function displayText(entry: TranscriptEntry, showIntermediate: boolean): string {
  if (showIntermediate && entry.provenance) {
    return entry.provenance.intermediate;
  }
  return entry.text;
}

// Chips shown in the provenance pane for one system entry.
export function provenanceChips(p: Provenance): string[] {
  return [p.entity, ...p.relations, ...p.objects];
}
