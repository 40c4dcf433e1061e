// DOM chat window: transcript, input row, provenance pane, restart.

import { ApiError, ChatApi } from "./api";
import {
  ChatViewState,
  displayText,
  failed,
  initialState,
  provenanceChips,
  sessionStarted,
  systemReplied,
  toggledIntermediate,
  userSent,
} from "./state";

export class ChatWindow {
  state: ChatViewState = initialState();
  private root: HTMLElement;

  constructor(root: HTMLElement, private api: ChatApi) {
    this.root = root;
    root.innerHTML = `
      <div class="transcript"></div>
      <div class="error" hidden></div>
      <form class="composer">
        <input name="message" type="text" autocomplete="off" placeholder="say something" />
        <button type="submit">send</button>
      </form>
      <div class="controls">
        <label><input type="checkbox" class="toggle-intermediate" /> show placeholders</label>
        <button type="button" class="restart">restart</button>
      </div>`;
    root.querySelector("form")!.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });
    root.querySelector(".toggle-intermediate")!.addEventListener("change", () => {
      this.state = toggledIntermediate(this.state);
      this.render();
    });
    root.querySelector(".restart")!.addEventListener("click", () => {
      void this.start();
    });
  }

  async start(): Promise<void> {
    try {
      const sessionId = await this.api.createSession();
      this.state = sessionStarted(this.state, sessionId);
    } catch (err) {
      this.state = failed(this.state, String(err));
    }
    this.render();
  }

  async submit(): Promise<void> {
    const input = this.root.querySelector<HTMLInputElement>("input[name=message]")!;
    const text = input.value.trim();
    const sessionId = this.state.sessionId;
    if (!text || this.state.pending || sessionId === null) {
      return;
    }
    input.value = "";
    this.state = userSent(this.state, text);
    this.render();
    try {
      const msg = await this.api.sendMessage(sessionId, text);
      this.state = systemReplied(this.state, msg);
    } catch (err) {
      const detail = err instanceof ApiError ? err.message : String(err);
      this.state = failed(this.state, detail);
    }
    this.render();
  }

  render(): void {
    const transcript = this.root.querySelector(".transcript")!;
    transcript.innerHTML = "";
    for (const entry of this.state.transcript) {
      const row = document.createElement("div");
      row.className = `entry ${entry.speaker}`;
      const bubble = document.createElement("span");
      bubble.className = "text";
      bubble.textContent = displayText(entry, this.state.showIntermediate);
      row.appendChild(bubble);
      if (entry.provenance) {
        const pane = document.createElement("div");
        pane.className = "provenance";
        for (const chip of provenanceChips(entry.provenance)) {
          const el = document.createElement("span");
          el.className = "chip";
          el.textContent = chip;
          pane.appendChild(el);
        }
        if (entry.provenance.lowConfidence) {
          const warn = document.createElement("span");
          warn.className = "chip low-confidence";
          warn.textContent = "low confidence";
          pane.appendChild(warn);
        }
        row.appendChild(pane);
      }
      transcript.appendChild(row);
    }
    const error = this.root.querySelector<HTMLElement>(".error")!;
    error.hidden = this.state.error === null;
    error.textContent = this.state.error ?? "";
  }
}

export async function mount(root: HTMLElement, api: ChatApi): Promise<ChatWindow> {
  const win = new ChatWindow(root, api);
  await win.start();
  return win;
}
