import { describe, expect, it } from "vitest";

import { applyError, applyResults, beginSubmit, initialState } from "./state.js";

const someResults = [{ track_id: "t1", score: 0.5 }];

describe("query state", () => {
  it("requires a selected video", () => {
    const state = initialState();
    expect(beginSubmit(state)).toBeNull();
    expect(state.error).toMatch(/select a video/);
  });

  it("binds results to the submission that produced them", () => {
    const state = initialState();
    state.videoId = "v1";
    state.text = "jazzy";
    const token = beginSubmit(state)!;
    expect(applyResults(state, token, someResults)).toBe(true);
    expect(state.results).toEqual(someResults);
    expect(state.resultsFor).toEqual({ videoId: "v1", text: "jazzy", topK: 10 });
    expect(state.pending).toBe(false);
  });

  it("ignores stale responses after a newer submission", () => {
    const state = initialState();
    state.videoId = "v1";
    const stale = beginSubmit(state)!;
    state.text = "refined query";
    const current = beginSubmit(state)!;
    expect(applyResults(state, stale, someResults)).toBe(false);
    expect(state.results).toBeNull();
    const fresh = [{ track_id: "t9", score: 0.9 }];
    expect(applyResults(state, current, fresh)).toBe(true);
    expect(state.results).toEqual(fresh);
    expect(state.resultsFor?.text).toBe("refined query");
  });

  it("keeps previous results when a submission fails", () => {
    const state = initialState();
    state.videoId = "v1";
    const first = beginSubmit(state)!;
    applyResults(state, first, someResults);
    const second = beginSubmit(state)!;
    expect(applyError(state, second, "boom")).toBe(true);
    expect(state.results).toEqual(someResults);
    expect(state.error).toBe("boom");
  });

  it("ignores stale errors too", () => {
    const state = initialState();
    state.videoId = "v1";
    const stale = beginSubmit(state)!;
    const current = beginSubmit(state)!;
    expect(applyError(state, stale, "old failure")).toBe(false);
    expect(state.error).toBeNull();
    applyResults(state, current, someResults);
    expect(state.results).toEqual(someResults);
  });
});
