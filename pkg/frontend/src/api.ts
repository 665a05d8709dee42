/** HTTP client for the annotation service, with an offline judgment queue.
 *
 * The queue guarantees at-least-once delivery from the client; the server's
 * exact-duplicate idempotency upgrades that to exactly-once in effect: a
 * resent judgment is acknowledged with `duplicate: true` and stored once.
 */

import type { JudgmentPayload, SubmitAck, TaskView } from './types';

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string }
) => Promise<{ status: number; json(): Promise<unknown> }>;

/** Transport failure (offline, DNS, reset); retryable. */
export class NetworkError extends Error {}

/** Server rejected the request; carries status and server detail. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    detail: string
  ) {
    super(detail);
  }
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class MemoryStorage implements StorageLike {
  private store = new Map<string, string>();

  getItem(key: string): string | null {
    return this.store.has(key) ? (this.store.get(key) as string) : null;
  }

  setItem(key: string, value: string): void {
    this.store.set(key, value);
  }

  removeItem(key: string): void {
    this.store.delete(key);
  }
}

const QUEUE_KEY = 'feedeval.pending_judgments';

export class OfflineQueue {
  constructor(private readonly storage: StorageLike) {}

  load(): JudgmentPayload[] {
    const raw = this.storage.getItem(QUEUE_KEY);
    if (!raw) {
      return [];
    }
    try {
      return JSON.parse(raw) as JudgmentPayload[];
    } catch {
      return [];
    }
  }

  private save(items: JudgmentPayload[]): void {
    if (items.length === 0) {
      this.storage.removeItem(QUEUE_KEY);
    } else {
      this.storage.setItem(QUEUE_KEY, JSON.stringify(items));
    }
  }

  enqueue(payload: JudgmentPayload): void {
    const items = this.load().filter((p) => p.task_id !== payload.task_id);
    items.push(payload);
    this.save(items);
  }

  dequeue(taskId: string): void {
    this.save(this.load().filter((p) => p.task_id !== taskId));
  }

  get size(): number {
    return this.load().length;
  }
}

async function parseDetail(response: { json(): Promise<unknown> }): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    return typeof body.detail === 'string' ? body.detail : JSON.stringify(body);
  } catch {
    return 'unreadable server response';
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
    private readonly token?: string
  ) {}

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.token) {
      headers['X-Auth-Token'] = this.token;
    }
    return headers;
  }

  private async request(path: string, init?: Parameters<FetchLike>[1]) {
    try {
      return await this.fetchImpl(`${this.baseUrl}${path}`, {
        ...init,
        headers: { ...this.headers(), ...(init?.headers ?? {}) },
      });
    } catch (error) {
      throw new NetworkError(String(error));
    }
  }

  async register(annotatorId: string): Promise<void> {
    const response = await this.request('/annotators', {
      method: 'POST',
      body: JSON.stringify({ annotator_id: annotatorId }),
    });
    if (response.status >= 400) {
      throw new ApiError(response.status, await parseDetail(response));
    }
  }

  /** Next unjudged task, or null when the queue is exhausted. */
  async nextTask(annotatorId: string): Promise<TaskView | null> {
    const response = await this.request(
      `/tasks/next?annotator=${encodeURIComponent(annotatorId)}`
    );
    if (response.status === 204) {
      return null;
    }
    if (response.status >= 400) {
      throw new ApiError(response.status, await parseDetail(response));
    }
    return (await response.json()) as TaskView;
  }

  async submitJudgment(payload: JudgmentPayload): Promise<SubmitAck> {
    const response = await this.request('/judgments', {
      method: 'POST',
      body: JSON.stringify(payload),
    });
    if (response.status >= 400) {
      throw new ApiError(response.status, await parseDetail(response));
    }
    return (await response.json()) as SubmitAck;
  }
}
