/** Wire types mirroring the annotation service API. */

export type TaskKind = 'pairwise' | 'likert' | 'revision_pairwise';

/** A task exactly as the server serves it: pane order is already permuted
 * server-side and the client never learns the underlying permutation. */
export interface TaskView {
  task_id: string;
  kind: TaskKind;
  dimension: string;
  context: string;
  excerpt: string;
  is_practice: boolean;
  practice_round: number;
  /** pairwise kinds */
  a?: string;
  b?: string;
  /** likert */
  feedback?: string;
  scales?: string[];
}

export type Winner = 'A' | 'B';

export interface JudgmentPayload {
  task_id: string;
  annotator_id: string;
  session_id: string;
  winner?: Winner;
  ratings?: number[];
}

export interface SubmitAck {
  sequence: number;
  duplicate: boolean;
}

export interface SessionSummary {
  practiceCompleted: number;
  mainCompleted: number;
  flushedOffline: number;
}
