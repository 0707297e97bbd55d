import { ApiClient, NoTrialsRemaining } from "./api.js";
import { TrialController } from "./controller.js";
import type { Side } from "./types.js";

interface AppState {
  controller: TrialController | null;
  completed: number;
  submitting: boolean;
}

/**
 * Mount the rating flow into `root`. The API client is injected so the
 * DOM behavior is testable against a fake transport.
 */
export function createApp(root: HTMLElement, api: ApiClient, raterId: string) {
  root.innerHTML = `
    <header>
      <span id="rater">rater: ${raterId}</span>
      <span id="progress"></span>
      <span id="status"></span>
    </header>
    <main id="trial" hidden>
      <p class="hint">Which restored image is closer to the degraded image?
        Space toggles the top row, 1/2 selects left/right, Enter submits.</p>
      <div class="row" id="row-top">
        <img id="top-left" alt="top left"><img id="top-right" alt="top right">
      </div>
      <div class="caption" id="top-caption"></div>
      <div class="row">
        <img id="mid-left" alt="degraded candidate left">
        <img id="mid-right" alt="degraded candidate right">
      </div>
      <div class="caption">re-degraded candidates</div>
      <div class="row">
        <img id="bottom-left" alt="candidate left">
        <img id="bottom-right" alt="candidate right">
      </div>
      <div class="caption">restored candidates</div>
      <div class="controls">
        <button id="toggle">toggle (space)</button>
        <button id="pick-left">choose left (1)</button>
        <button id="pick-right">choose right (2)</button>
        <button id="submit" disabled>submit (enter)</button>
      </div>
    </main>
    <main id="done" hidden><h2>All trials completed</h2><p id="summary"></p></main>
  `;

  const el = (id: string) => root.querySelector<HTMLElement>(`#${id}`)!;
  const img = (id: string) => root.querySelector<HTMLImageElement>(`#${id}`)!;
  const button = (id: string) => root.querySelector<HTMLButtonElement>(`#${id}`)!;

  const state: AppState = { controller: null, completed: 0, submitting: false };

  function render() {
    const c = state.controller;
    el("progress").textContent = `completed: ${state.completed}`;
    if (c === null) {
      return;
    }
    img("top-left").src = c.topImage("left");
    img("top-right").src = c.topImage("right");
    img("mid-left").src = c.midImage("left");
    img("mid-right").src = c.midImage("right");
    img("bottom-left").src = c.bottomImage("left");
    img("bottom-right").src = c.bottomImage("right");
    el("top-caption").textContent =
      c.topState === "degraded"
        ? `top row: degraded image (toggles: ${c.toggleCount})`
        : `top row: re-degraded candidates (toggles: ${c.toggleCount})`;
    button("pick-left").classList.toggle("picked", c.selectedSide === "left");
    button("pick-right").classList.toggle("picked", c.selectedSide === "right");
    button("submit").disabled = !c.canSubmit || state.submitting;
  }

  function setStatus(text: string) {
    el("status").textContent = text;
  }

  async function loadNext() {
    try {
      const payload = await api.nextTrial(raterId);
      state.controller = new TrialController(payload);
      el("trial").hidden = false;
      el("done").hidden = true;
      setStatus("");
    } catch (err) {
      if (err instanceof NoTrialsRemaining) {
        state.controller = null;
        el("trial").hidden = true;
        el("done").hidden = false;
        el("summary").textContent = `${state.completed} judgments recorded this session.`;
        return;
      }
      setStatus(`failed to load trial, retrying: ${err}`);
      setTimeout(loadNext, 1500);
    }
    render();
  }

  function toggle() {
    state.controller?.toggle();
    render();
  }

  function select(side: Side) {
    state.controller?.select(side);
    render();
  }

  async function submit() {
    const c = state.controller;
    if (c === null || !c.canSubmit || state.submitting) {
      setStatus(c && !c.canSubmit ? "choose a candidate first" : "");
      return;
    }
    state.submitting = true;
    render();
    try {
      await api.submitWithRetry(c.buildJudgment(raterId), {
        onRetry: (attempt) => setStatus(`submit failed, retry ${attempt} queued`),
      });
      state.completed += 1;
      state.controller = null;
      await loadNext();
    } catch (err) {
      setStatus(`submit failed: ${err}`);
    } finally {
      state.submitting = false;
      render();
    }
  }

  button("toggle").addEventListener("click", toggle);
  button("pick-left").addEventListener("click", () => select("left"));
  button("pick-right").addEventListener("click", () => select("right"));
  button("submit").addEventListener("click", submit);
  root.ownerDocument.addEventListener("keydown", (ev) => {
    if (ev.key === " ") {
      ev.preventDefault();
      toggle();
    } else if (ev.key === "1") {
      select("left");
    } else if (ev.key === "2") {
      select("right");
    } else if (ev.key === "Enter") {
      void submit();
    }
  });

  void loadNext();
  return { state, render, submit, toggle, select };
}

export function init() {
  const params = new URLSearchParams(window.location.search);
  let rater = params.get("rater") ?? window.localStorage.getItem("rater_id");
  if (!rater) {
    rater = window.prompt("rater id?") || `anon-${Math.floor(Math.random() * 1e6)}`;
  }
  window.localStorage.setItem("rater_id", rater);
  createApp(document.getElementById("app")!, new ApiClient(""), rater);
}

declare global {
  interface Window {
    __cdiqaInit?: boolean;
  }
}

if (typeof window !== "undefined" && !window.__cdiqaInit && document.getElementById("app")) {
  window.__cdiqaInit = true;
  init();
}
