/** Query state with stale-response protection.
 *
 * At most one submission is "current": responses to older submissions are
 * dropped so the rendered list always corresponds to the most recently
 * submitted (video, text, top_k). On errors the previous results stay.
 */

import type { QueryResult } from "./api.js";

export interface QueryState {
  videoId: string | null;
  text: string;
  topK: number;
  results: QueryResult[] | null;
  /** inputs that produced `results` */
  resultsFor: { videoId: string; text: string; topK: number } | null;
  error: string | null;
  pending: boolean;
  submissionCounter: number;
}

export function initialState(): QueryState {
  return {
    videoId: null,
    text: "",
    topK: 10,
    results: null,
    resultsFor: null,
    error: null,
    pending: false,
    submissionCounter: 0,
  };
}

export interface SubmissionToken {
  id: number;
  videoId: string;
  text: string;
  topK: number;
}

/** Start a submission; returns null when no video is selected. */
export function beginSubmit(state: QueryState): SubmissionToken | null {
  if (!state.videoId) {
    state.error = "select a video first";
    return null;
  }
  state.submissionCounter += 1;
  state.pending = true;
  return {
    id: state.submissionCounter,
    videoId: state.videoId,
    text: state.text,
    topK: state.topK,
  };
}

function isCurrent(state: QueryState, token: SubmissionToken): boolean {
  return token.id === state.submissionCounter;
}

/** Apply a response; stale tokens are ignored entirely. */
export function applyResults(
  state: QueryState,
  token: SubmissionToken,
  results: QueryResult[],
): boolean {
  if (!isCurrent(state, token)) return false;
  state.results = results;
  state.resultsFor = { videoId: token.videoId, text: token.text, topK: token.topK };
  state.error = null;
  state.pending = false;
  return true;
}

/** Apply a failure: keep the previous results, surface the message. */
export function applyError(
  state: QueryState,
  token: SubmissionToken,
  message: string,
): boolean {
  if (!isCurrent(state, token)) return false;
  state.error = message;
  state.pending = false;
  return true;
}
