/** Annotation session state machine.
 *
 * One active task at a time: fetch, collect an answer, submit, advance.
 * Submission while offline parks the judgment in the local queue; the next
 * reconnect flushes it before any new work, and the server's idempotent
 * duplicate handling keeps delivery exactly-once. The server stays the
 * source of truth throughout: refreshing mid-task simply re-fetches the
 * same task.
 */

import { ApiClient, ApiError, NetworkError, OfflineQueue } from './api';
import type { JudgmentPayload, SessionSummary, TaskView, Winner } from './types';

export type SessionState =
  | { phase: 'idle' }
  | { phase: 'task'; task: TaskView }
  | { phase: 'offline'; pending: number }
  | { phase: 'done'; summary: SessionSummary }
  | { phase: 'error'; message: string; recoverable: boolean };

export interface Answer {
  winner?: Winner;
  ratings?: number[];
}

function validateAnswer(task: TaskView, answer: Answer): string | null {
  if (task.kind === 'likert') {
    const scales = task.scales ?? [];
    if (!answer.ratings || answer.ratings.length !== scales.length) {
      return `all ${scales.length} ratings are required`;
    }
    for (const value of answer.ratings) {
      if (!Number.isInteger(value) || value < 1 || value > 5) {
        return 'ratings must be whole numbers from 1 to 5';
      }
    }
    return null;
  }
  if (answer.winner !== 'A' && answer.winner !== 'B') {
    return 'choose feedback A or B';
  }
  return null;
}

export class AnnotationSession {
  private state: SessionState = { phase: 'idle' };
  private summary: SessionSummary = {
    practiceCompleted: 0,
    mainCompleted: 0,
    flushedOffline: 0,
  };

  constructor(
    private readonly api: ApiClient,
    private readonly queue: OfflineQueue,
    private readonly annotatorId: string,
    private readonly sessionId: string
  ) {}

  get current(): SessionState {
    return this.state;
  }

  get progress(): SessionSummary {
    return { ...this.summary };
  }

  async start(): Promise<SessionState> {
    await this.api.register(this.annotatorId);
    return this.advance();
  }

  /** Flush queued judgments, then fetch the next task. */
  async advance(): Promise<SessionState> {
    try {
      await this.flushQueue();
      const task = await this.api.nextTask(this.annotatorId);
      this.state = task
        ? { phase: 'task', task }
        : { phase: 'done', summary: this.progress };
    } catch (error) {
      if (error instanceof NetworkError) {
        this.state = { phase: 'offline', pending: this.queue.size };
      } else {
        this.state = { phase: 'error', message: String(error), recoverable: false };
      }
    }
    return this.state;
  }

  private async flushQueue(): Promise<void> {
    for (const payload of this.queue.load()) {
      const ack = await this.api.submitJudgment(payload); // NetworkError propagates
      this.queue.dequeue(payload.task_id);
      if (!ack.duplicate) {
        this.summary.flushedOffline += 1;
      }
    }
  }

  private countCompletion(task: TaskView): void {
    if (task.is_practice) {
      this.summary.practiceCompleted += 1;
    } else {
      this.summary.mainCompleted += 1;
    }
  }

  /** Submit the answer for the active task.
   *
   * Returns the next state; on validation problems the task stays active
   * with an inline message so inputs are preserved. The answer payload never
   * contains a de-randomized winner: positions A/B are submitted verbatim.
   */
  async submit(answer: Answer): Promise<SessionState> {
    if (this.state.phase !== 'task') {
      return this.state;
    }
    const task = this.state.task;
    const problem = validateAnswer(task, answer);
    if (problem) {
      return { phase: 'error', message: problem, recoverable: true };
    }
    const payload: JudgmentPayload = {
      task_id: task.task_id,
      annotator_id: this.annotatorId,
      session_id: this.sessionId,
      ...(task.kind === 'likert'
        ? { ratings: answer.ratings }
        : { winner: answer.winner }),
    };
    try {
      await this.api.submitJudgment(payload);
      this.countCompletion(task);
      return this.advance();
    } catch (error) {
      if (error instanceof NetworkError) {
        this.queue.enqueue(payload);
        this.countCompletion(task);
        this.state = { phase: 'offline', pending: this.queue.size };
        return this.state;
      }
      if (error instanceof ApiError) {
        // conflict or validation rejection: show the server message, keep inputs
        return { phase: 'error', message: error.message, recoverable: true };
      }
      throw error;
    }
  }

  /** Called when connectivity returns; flushes and resumes. */
  async reconnect(): Promise<SessionState> {
    return this.advance();
  }
}
