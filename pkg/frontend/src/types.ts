/** JSON shapes served by the engine API, mirrored one-to-one. */

export interface Goal {
  id: string;
  text: string;
  created_at: string;
  status: 'active' | 'superseded';
}

export interface CodeRef {
  path: string;
  line_start: number;
  line_end: number;
  excerpt: string;
}

export type QuestionStatus = 'pending' | 'answered' | 'dismissed';

export interface Question {
  id: string;
  title: string;
  yes_rationale: string;
  no_rationale: string;
  code_refs: CodeRef[];
  origin_goal: string;
  created_at: string;
  status: QuestionStatus;
  decision_id: string | null;
}

export type Answer = 'yes' | 'no' | 'not-applicable';

export interface Revision {
  ts: string;
  title: string;
  answer: Answer;
  comment: string;
}

export interface Decision {
  id: string;
  origin: 'elicited' | 'custom';
  title: string;
  answer: Answer;
  comment: string;
  created_at: string;
  question_id: string | null;
  status: 'active' | 'revoked';
  revisions: Revision[];
}

export interface BankView {
  goal: Goal | null;
  pending: Question[];
  decisions: Decision[];
  revoked: Decision[];
  backlog: number;
}

export interface SessionEvent {
  seq: number;
  ts: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export interface ValidationEntry {
  status: string;
  title: string;
  suite: { suite_name?: string; suite_path?: string } | null;
}

export interface ValidationReport {
  generated_at: string;
  per_decision: Record<string, ValidationEntry>;
  summary: Record<string, number>;
  order: string[];
  checklist?: string[];
}
