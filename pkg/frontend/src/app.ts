/** Single-page annotation app: plain DOM, no framework.
 *
 * The server is the single source of truth — every transition re-fetches the
 * next open task, so a page refresh always reproduces server state. Verdict
 * controls only exist once a task is fully rendered, submission is guarded
 * against double clicks client-side (and rejected server-side), and the whole
 * flow is keyboard-operable: v / n pick the verdict, 1..3 pick the reason,
 * Enter submits.
 */

import { ApiClient, ApiError, ProgressCounters, TaskView } from "./api.js";

export interface AppOptions {
  api: ApiClient;
  /** Skip the sign-in view when the session already knows the annotator. */
  annotator?: string;
  /** Called once when the annotator signs in (the bootstrap persists it). */
  onLogin?: (name: string) => void;
  /** Called when the annotator is switched (the bootstrap clears it). */
  onLogout?: () => void;
}

const VERDICT_LABELS: Record<string, string> = {
  valid: "Valid",
  non_valid: "Non-valid",
};

const VERDICT_KEYS: Record<string, string> = { v: "valid", n: "non_valid" };

function titleCase(word: string): string {
  return word.charAt(0).toUpperCase() + word.slice(1);
}

type Child = Node | string;

function h(
  tag: string,
  attrs: Record<string, string | boolean> = {},
  ...children: Child[]
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "boolean") {
      if (value) node.setAttribute(key, "");
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export class App {
  private annotator: string | null;
  private task: TaskView | null = null;
  private verdict: string | null = null;
  private reason: string | null = null;
  private submitting = false;
  private notice: string | null = null;
  private banner: string | null = null;
  private readonly keyListener: (event: KeyboardEvent) => void;

  constructor(
    private readonly root: HTMLElement,
    private readonly options: AppOptions,
  ) {
    this.annotator = options.annotator ?? null;
    this.keyListener = (event) => this.handleKey(event);
    root.ownerDocument.addEventListener("keydown", this.keyListener);
  }

  /** Show the sign-in view, or load the first task when signed in. */
  async start(): Promise<void> {
    if (this.annotator === null) {
      this.renderLogin();
      return;
    }
    await this.loadNext();
  }

  destroy(): void {
    this.root.ownerDocument.removeEventListener("keydown", this.keyListener);
    this.root.replaceChildren();
  }

  private async loadNext(): Promise<void> {
    if (this.annotator === null) return;
    this.task = null;
    this.verdict = null;
    this.reason = null;
    this.submitting = false;
    this.banner = null;
    this.renderLoading();
    let next;
    try {
      next = await this.options.api.fetchNextTask(this.annotator);
    } catch (error) {
      this.renderFatal(describeError(error));
      return;
    }
    if (next.done) {
      await this.renderDone(next.progress);
      return;
    }
    this.task = next;
    this.renderTask();
  }

  private async submit(): Promise<void> {
    if (this.submitting || this.task === null || this.annotator === null) return;
    if (!this.canSubmit()) return;
    this.submitting = true;
    this.renderTask();
    try {
      await this.options.api.submitLabel(
        this.task.task_id,
        this.annotator,
        this.verdict as string,
        this.reason ?? undefined,
      );
    } catch (error) {
      if (error instanceof ApiError && error.code === "AlreadyLabeled") {
        // Someone (or another tab) got there first: notify, move on.
        this.notice = "Already labeled — moving to the next task.";
      } else if (error instanceof ApiError && error.status < 500) {
        this.submitting = false;
        this.banner = error.message;
        this.renderTask();
        return;
      } else {
        this.renderFatal(describeError(error));
        return;
      }
    }
    await this.loadNext();
  }

  private canSubmit(): boolean {
    if (this.verdict === null) return false;
    if (this.verdict === "non_valid" && this.reason === null) return false;
    return true;
  }

  private chooseVerdict(verdict: string): void {
    if (this.submitting || this.task === null) return;
    this.verdict = verdict;
    if (verdict !== "non_valid") this.reason = null;
    this.renderTask();
  }

  private chooseReason(reason: string): void {
    if (this.submitting || this.task === null) return;
    if (this.verdict !== "non_valid") return;
    this.reason = reason;
    this.renderTask();
  }

  private handleKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "SELECT")) {
      return;
    }
    if (this.task === null) return;
    const verdict = VERDICT_KEYS[event.key];
    if (verdict && this.task.verdicts.includes(verdict)) {
      this.chooseVerdict(verdict);
      return;
    }
    const index = Number.parseInt(event.key, 10);
    if (index >= 1 && index <= this.task.reasons.length) {
      this.chooseReason(this.task.reasons[index - 1]);
      return;
    }
    if (event.key === "Enter") {
      void this.submit();
    }
  }

  // ------------------------------------------------------------- rendering

  private renderLogin(): void {
    const input = h("input", {
      id: "annotator-input",
      type: "text",
      placeholder: "annotator id",
      autocomplete: "off",
    }) as HTMLInputElement;
    const form = h(
      "form",
      { id: "login-view", class: "card" },
      h("h1", {}, "Argument annotation"),
      h("p", {}, "Enter your annotator id to start labeling."),
      input,
      h("button", { id: "start", type: "submit" }, "Start"),
    );
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const name = input.value.trim();
      if (!name) return;
      this.annotator = name;
      this.options.onLogin?.(name);
      void this.loadNext();
    });
    this.root.replaceChildren(form);
    input.focus();
  }

  private renderLoading(): void {
    this.root.replaceChildren(
      h("div", { id: "loading-view", class: "card" }, h("p", {}, "Loading…")),
    );
  }

  private renderTask(): void {
    const task = this.task;
    if (task === null) return;

    const header = h(
      "header",
      { id: "task-header" },
      h(
        "div",
        { class: "scheme-title" },
        h("h1", { id: "scheme-name" }, task.scheme.name),
        h("span", { class: "acronym" }, task.scheme.acronym),
      ),
      h(
        "div",
        { class: "badges" },
        h("span", { id: "topic", class: "badge" }, task.topic),
        h("span", { id: "stance", class: "badge" }, task.stance.replace("_", " ")),
        h("span", { id: "language", class: "badge" }, task.language),
        h(
          "span",
          { id: "progress", class: "badge" },
          `${task.progress.labeled} / ${task.progress.assigned} labeled`,
        ),
        h("span", { id: "record-id", class: "record-id" }, task.record_id),
      ),
    );

    const pattern = h(
      "section",
      { class: "panel" },
      h("h2", {}, "Scheme pattern"),
      h("pre", { id: "pattern" }, task.scheme.pattern),
    );
    const components = h(
      "section",
      { id: "components", class: "panel" },
      h("h2", {}, "Argument"),
      ...task.components.map((component) =>
        h(
          "div",
          { class: "component" },
          h("div", { class: "role" }, component.role.replace(/_/g, " ")),
          h("div", { class: "text" }, component.text),
        ),
      ),
    );

    const verdictButtons = task.verdicts.map((verdict) => {
      const key = Object.entries(VERDICT_KEYS).find(([, v]) => v === verdict)?.[0];
      const button = h(
        "button",
        {
          id: `verdict-${verdict}`,
          class: "verdict",
          type: "button",
          "aria-pressed": String(this.verdict === verdict),
          disabled: this.submitting,
        },
        `${VERDICT_LABELS[verdict] ?? verdict}${key ? ` (${key})` : ""}`,
      );
      button.addEventListener("click", () => this.chooseVerdict(verdict));
      return button;
    });

    const reasonButtons = task.reasons.map((reason, index) => {
      const button = h(
        "button",
        {
          id: `reason-${reason}`,
          class: "reason",
          type: "button",
          "aria-pressed": String(this.reason === reason),
          disabled: this.submitting,
        },
        `${titleCase(reason)} (${index + 1})`,
      );
      button.addEventListener("click", () => this.chooseReason(reason));
      return button;
    });
    const reasonBar = h(
      "div",
      { id: "reason-bar", hidden: this.verdict !== "non_valid" },
      h("span", { class: "hint" }, "Why is it non-valid?"),
      ...reasonButtons,
    );

    const submitButton = h(
      "button",
      {
        id: "submit",
        type: "button",
        disabled: this.submitting || !this.canSubmit(),
      },
      this.submitting ? "Submitting…" : "Submit (Enter)",
    );
    submitButton.addEventListener("click", () => void this.submit());

    const children: Child[] = [header];
    if (this.notice !== null) {
      children.push(h("div", { id: "notice", class: "notice" }, this.notice));
      this.notice = null;
    }
    if (this.banner !== null) {
      children.push(h("div", { id: "banner", class: "banner" }, this.banner));
    }
    children.push(
      h("main", { id: "task-view", class: "columns" }, pattern, components),
      h(
        "footer",
        { id: "verdict-bar" },
        ...verdictButtons,
        reasonBar,
        submitButton,
      ),
    );
    this.root.replaceChildren(...children);
  }

  private async renderDone(progress: ProgressCounters): Promise<void> {
    const card = h(
      "div",
      { id: "done-view", class: "card" },
      h("h1", {}, progress.assigned === 0 ? "Nothing assigned" : "Queue complete"),
      h(
        "p",
        { id: "done-progress" },
        progress.assigned === 0
          ? `No tasks are assigned to “${this.annotator}”.`
          : `You labeled ${progress.labeled} of ${progress.assigned} tasks.`,
      ),
    );
    try {
      const agreement = await this.options.api.fetchAgreement();
      if (agreement.pairs.length > 0) {
        card.append(
          h(
            "p",
            { id: "agreement" },
            `Agreement (${agreement.group}): mean pairwise κ = ` +
              `${agreement.mean_kappa.toFixed(3)} over ${agreement.pairs.length} ` +
              `pair${agreement.pairs.length === 1 ? "" : "s"}.`,
          ),
        );
      }
    } catch {
      // No overlap group, or overlap still incomplete — nothing to show yet.
    }
    const switchButton = h(
      "button",
      { id: "switch-annotator", type: "button" },
      "Switch annotator",
    );
    switchButton.addEventListener("click", () => {
      this.annotator = null;
      this.options.onLogout?.();
      this.renderLogin();
    });
    card.append(switchButton);
    this.root.replaceChildren(card);
  }

  private renderFatal(message: string): void {
    const retry = h("button", { id: "retry", type: "button" }, "Retry");
    retry.addEventListener("click", () => void this.loadNext());
    this.root.replaceChildren(
      h(
        "div",
        { id: "error-view", class: "card banner" },
        h("h1", {}, "Connection problem"),
        h("p", { id: "error-detail" }, message),
        retry,
      ),
    );
  }
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  if (error instanceof Error) return error.message;
  return String(error);
}
