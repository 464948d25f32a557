/** Task-flow state machine, independent of the DOM.
 *
 * Phases:
 *   loading -> rating -> ... -> done
 *               |  ^
 *               v  |
 *             review (revisiting an already-rated task, read-only)
 *   any fetch/submit failure -> error (retry keeps all local state)
 */

import { ApiClient, ApiError, TaskView } from "./api.js";

export type Phase = "loading" | "rating" | "review" | "done" | "error";

export interface Rating {
  coverage: number;
  relevance: number;
}

export class Session {
  phase: Phase = "loading";
  tasks: TaskView[] = [];
  index = 0;
  coverage: number | null = null;
  relevance: number | null = null;
  submitting = false;
  errorMessage = "";
  fieldError = "";
  // locally known ratings for read-only revisits within this session
  readonly ratings = new Map<string, Rating>();
  /** Called after every state transition; the view layer repaints here. */
  onUpdate: () => void = () => {};

  constructor(private readonly api: ApiClient) {}

  private changed(): void {
    this.onUpdate();
  }

  get current(): TaskView | null {
    return this.tasks[this.index] ?? null;
  }

  get progress(): { done: number; total: number } {
    const done = this.tasks.filter((t) => t.rated).length;
    return { done, total: this.tasks.length };
  }

  async load(): Promise<void> {
    this.phase = "loading";
    this.changed();
    let list;
    try {
      list = await this.api.fetchTasks();
    } catch (err) {
      this.phase = "error";
      this.errorMessage = err instanceof Error ? err.message : String(err);
      this.changed();
      return;
    }
    // task order is fixed per annotator: the server order is preserved
    this.tasks = list.tasks;
    this.goToFirstUnrated();
    this.changed();
  }

  private goToFirstUnrated(): void {
    const next = this.tasks.findIndex((t) => !t.rated);
    if (next === -1) {
      this.phase = "done";
      return;
    }
    this.index = next;
    this.phase = "rating";
    this.coverage = null;
    this.relevance = null;
    this.fieldError = "";
  }

  setCoverage(value: number): void {
    this.coverage = value;
    this.changed();
  }

  setRelevance(value: number): void {
    this.relevance = value;
    this.changed();
  }

  /** Both ratings are required before submit is possible. */
  get canSubmit(): boolean {
    return (
      this.phase === "rating" &&
      !this.submitting &&
      this.coverage !== null &&
      this.relevance !== null
    );
  }

  async submit(): Promise<void> {
    if (!this.canSubmit) {
      return; // double clicks and incomplete forms are no-ops
    }
    const task = this.current;
    if (task === null) {
      return;
    }
    const coverage = this.coverage as number;
    const relevance = this.relevance as number;
    this.submitting = true;
    try {
      await this.api.submitRating(task.task_id, coverage, relevance);
    } catch (err) {
      this.submitting = false;
      if (err instanceof ApiError && err.status === 400) {
        this.fieldError = "rating rejected by the server; check both values";
        this.changed();
        return;
      }
      this.phase = "error";
      this.errorMessage = err instanceof Error ? err.message : String(err);
      this.changed();
      return;
    }
    this.submitting = false;
    task.rated = true;
    this.ratings.set(task.task_id, { coverage, relevance });
    this.goToFirstUnrated();
    this.changed();
  }

  /** Revisit any task; already-rated tasks are shown read-only. */
  goTo(index: number): void {
    if (this.phase === "loading" || index < 0 || index >= this.tasks.length) {
      return;
    }
    this.index = index;
    const task = this.tasks[index];
    if (task.rated) {
      this.phase = "review";
      const prior = this.ratings.get(task.task_id) ?? null;
      this.coverage = prior ? prior.coverage : null;
      this.relevance = prior ? prior.relevance : null;
    } else {
      this.phase = "rating";
      this.coverage = null;
      this.relevance = null;
    }
    this.fieldError = "";
    this.changed();
  }

  /** Leave a read-only review and return to the first unrated task. */
  resume(): void {
    if (this.phase === "review" || this.phase === "rating") {
      this.goToFirstUnrated();
      this.changed();
    }
  }

  async retry(): Promise<void> {
    if (this.phase !== "error") {
      return;
    }
    await this.load();
  }
}
