/** Chat surface: transcript with act badges, search panel, params form.
 *
 * Rendering discipline: the transcript is always redrawn from a service
 * response (session detail), never from locally tracked message state, so
 * everything on screen traces back to the server.
 */

import { ServiceClient, ServiceError, freshNonce } from "./api.js";
import type { SearchStatsView, SessionDetail, TurnResponse } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class ChatUi {
  private sessionId: string | null = null;
  private inFlight = false;
  private terminal = false;
  private pendingNonce: string | null = null;

  private readonly transcriptEl: HTMLDivElement;
  private readonly bannerEl: HTMLDivElement;
  private readonly toastEl: HTMLDivElement;
  private readonly searchPanelEl: HTMLDivElement;
  readonly scenarioInput: HTMLInputElement;
  readonly levelInput: HTMLSelectElement;
  readonly iterationsInput: HTMLInputElement;
  readonly startButton: HTMLButtonElement;
  readonly messageInput: HTMLInputElement;
  readonly sendButton: HTMLButtonElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ServiceClient,
  ) {
    const startForm = el("div", "start-form");
    this.scenarioInput = el("input", "scenario-input");
    this.scenarioInput.value = "scripted_smoke";
    this.levelInput = el("select", "level-input");
    for (const level of ["1", "2"]) {
      const option = el("option", undefined, level);
      option.value = level;
      this.levelInput.appendChild(option);
    }
    this.iterationsInput = el("input", "iterations-input");
    this.iterationsInput.type = "number";
    this.iterationsInput.value = "10";
    this.startButton = el("button", "start-button", "Start session");
    this.startButton.addEventListener("click", () => void this.startSession());
    startForm.append(
      this.scenarioInput,
      this.levelInput,
      this.iterationsInput,
      this.startButton,
    );

    this.transcriptEl = el("div", "transcript");
    this.bannerEl = el("div", "banner hidden");
    this.toastEl = el("div", "toast hidden");
    this.searchPanelEl = el("div", "search-panel");

    const composer = el("div", "composer");
    this.messageInput = el("input", "message-input");
    this.messageInput.placeholder = "Say something as the user...";
    this.sendButton = el("button", "send-button", "Send");
    this.sendButton.disabled = true;
    this.sendButton.addEventListener("click", () => void this.sendMessage());
    this.messageInput.addEventListener("keydown", (event) => {
      if (event.key === "Enter") void this.sendMessage();
    });
    composer.append(this.messageInput, this.sendButton);

    root.append(startForm, this.bannerEl, this.transcriptEl, this.searchPanelEl, composer, this.toastEl);
  }

  async startSession(): Promise<void> {
    this.clearToast();
    try {
      const created = await this.client.createSession(this.scenarioInput.value, {
        level: Number(this.levelInput.value),
        iterations: Number(this.iterationsInput.value),
      });
      this.sessionId = created.session_id;
      this.terminal = false;
      this.bannerEl.classList.add("hidden");
      this.renderTranscript(created.opening);
      this.sendButton.disabled = false;
    } catch (error) {
      this.showToast(error);
    }
  }

  async sendMessage(): Promise<void> {
    if (!this.sessionId || this.inFlight || this.terminal) return;
    const text = this.messageInput.value.trim();
    if (!text) return;
    this.inFlight = true;
    this.sendButton.disabled = true;
    this.messageInput.disabled = true;
    if (this.pendingNonce === null) this.pendingNonce = freshNonce();
    try {
      const turn = await this.client.sendMessage(this.sessionId, text, this.pendingNonce, {
        level: Number(this.levelInput.value),
        iterations: Number(this.iterationsInput.value),
      });
      this.pendingNonce = null;
      this.messageInput.value = "";
      const detail = await this.client.getSession(this.sessionId);
      this.renderTranscript(detail.transcript);
      if (turn.stats) this.renderSearchPanel(detail.params.level, turn.stats);
      if (turn.terminal) this.renderTerminal(turn);
    } catch (error) {
      // Nonce kept: a retry of the same turn must not trigger a second plan.
      this.showToast(error);
    } finally {
      this.inFlight = false;
      if (!this.terminal) {
        this.sendButton.disabled = false;
        this.messageInput.disabled = false;
      }
    }
  }

  private renderTranscript(utterances: SessionDetail["transcript"]): void {
    this.transcriptEl.replaceChildren();
    for (const utterance of utterances) {
      const bubble = el("div", `bubble ${utterance.speaker.toLowerCase()}`);
      if (utterance.act !== null) {
        bubble.appendChild(el("span", "act-badge", utterance.act));
      }
      bubble.appendChild(el("span", "text", utterance.text));
      this.transcriptEl.appendChild(bubble);
    }
  }

  private renderSearchPanel(level: number, stats: SearchStatsView): void {
    this.searchPanelEl.replaceChildren(
      el("span", "stat level", `level ${level}`),
      el("span", "stat iterations", `iterations ${stats.iterations_per_level.join("/")}`),
      el("span", "stat playouts", `playouts ${stats.playouts_executed}`),
      el("span", "stat best-score", `best score ${stats.best_score.toFixed(3)}`),
    );
  }

  private renderTerminal(turn: TurnResponse): void {
    this.terminal = true;
    this.sendButton.disabled = true;
    this.messageInput.disabled = true;
    const reward = turn.reward === null ? "n/a" : turn.reward.toFixed(3);
    this.bannerEl.textContent = `${turn.status} - reward ${reward}`;
    this.bannerEl.classList.remove("hidden");
  }

  private showToast(error: unknown): void {
    const message =
      error instanceof ServiceError
        ? `${error.status}: ${error.message}`
        : String(error);
    this.toastEl.textContent = message;
    this.toastEl.classList.remove("hidden");
  }

  private clearToast(): void {
    this.toastEl.classList.add("hidden");
    this.toastEl.textContent = "";
  }
}
