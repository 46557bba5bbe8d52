/**
 * Console state: a client-side fold of the session event stream plus an
 * optimistic-action overlay.
 *
 * The fold mirrors the engine's bank projection field for field, so after
 * the stream has caught up (and no actions are pending) `bank()` is deeply
 * equal to GET /api/bank. Optimistic entries are cleared when the matching
 * server event arrives, or rolled back by removing the overlay entry; the
 * folded state itself is never speculatively mutated.
 */

import type { Answer, BankView, Decision, Goal, Question, SessionEvent } from './types.js';

export const DISPLAY_CAP = 5;

export type ActionKind =
  | 'answer'
  | 'dismiss'
  | 'custom'
  | 'edit'
  | 'revoke'
  | 'implement'
  | 'validate';

export interface OptimisticAction {
  requestId: string;
  kind: ActionKind;
  /** question or decision the action targets (custom: the title). */
  target: string;
  /** extra detail for rendering the provisional row. */
  detail?: { title?: string; answer?: Answer; comment?: string };
}

interface Payloads {
  [key: string]: unknown;
}

export class ConsoleState {
  goals = new Map<string, Goal>();
  activeGoalId: string | null = null;
  questions = new Map<string, Question>();
  questionOrder: string[] = [];
  decisions = new Map<string, Decision>();
  decisionOrder: string[] = [];
  streamCursor = 0;
  openQuestionId: string | null = null;
  pendingActions: OptimisticAction[] = [];
  lastValidationSeq = 0;

  /** Fold one server event; clears any optimistic entry it settles. */
  applyServerEvent(event: SessionEvent): void {
    if (event.seq <= this.streamCursor) return; // replayed duplicate
    this.streamCursor = event.seq;
    const p = event.payload as Payloads;
    switch (event.kind) {
      case 'GoalSet': {
        if (this.activeGoalId) {
          const prior = this.goals.get(this.activeGoalId);
          if (prior) prior.status = 'superseded';
        }
        const goal: Goal = {
          id: p.goal_id as string,
          text: p.text as string,
          created_at: p.created_at as string,
          status: 'active',
        };
        this.goals.set(goal.id, goal);
        this.activeGoalId = goal.id;
        break;
      }
      case 'QuestionIngested': {
        const question: Question = {
          id: p.question_id as string,
          title: p.title as string,
          yes_rationale: p.yes_rationale as string,
          no_rationale: p.no_rationale as string,
          code_refs: (p.code_refs as Question['code_refs']) ?? [],
          origin_goal: p.origin_goal as string,
          created_at: p.created_at as string,
          status: 'pending',
          decision_id: null,
        };
        this.questions.set(question.id, question);
        this.questionOrder.push(question.id);
        break;
      }
      case 'QuestionAnswered': {
        const question = this.questions.get(p.question_id as string);
        if (question) {
          question.status = 'answered';
          question.decision_id = p.decision_id as string;
        }
        break;
      }
      case 'QuestionDismissed': {
        const question = this.questions.get(p.question_id as string);
        if (question) question.status = 'dismissed';
        break;
      }
      case 'DecisionRecorded': {
        const decision: Decision = {
          id: p.decision_id as string,
          origin: p.origin as Decision['origin'],
          title: p.title as string,
          answer: p.answer as Answer,
          comment: (p.comment as string) ?? '',
          created_at: p.created_at as string,
          question_id: (p.question_id as string | null) ?? null,
          status: 'active',
          revisions: [],
        };
        this.decisions.set(decision.id, decision);
        this.decisionOrder.push(decision.id);
        break;
      }
      case 'DecisionRevised': {
        const decision = this.decisions.get(p.decision_id as string);
        if (decision) {
          decision.revisions.push({
            ts: p.revised_at as string,
            title: decision.title,
            answer: decision.answer,
            comment: decision.comment,
          });
          decision.title = p.title as string;
          decision.answer = p.answer as Answer;
          decision.comment = p.comment as string;
        }
        break;
      }
      case 'DecisionRevoked': {
        const decision = this.decisions.get(p.decision_id as string);
        if (decision) decision.status = 'revoked';
        break;
      }
      case 'ValidationCompleted':
        this.lastValidationSeq = event.seq;
        break;
      default:
        break; // agent lifecycle events don't change the bank
    }
    this.pendingActions = this.pendingActions.filter((a) => !actionSettledBy(a, event));
  }

  /** The folded bank projection (identical shape to GET /api/bank). */
  bank(): BankView {
    const pending = this.questionOrder
      .map((id) => this.questions.get(id)!)
      .filter((q) => q.status === 'pending');
    const active = this.decisionOrder
      .map((id) => this.decisions.get(id)!)
      .filter((d) => d.status === 'active');
    const revoked = this.decisionOrder
      .map((id) => this.decisions.get(id)!)
      .filter((d) => d.status === 'revoked');
    return {
      goal: this.activeGoalId ? this.goals.get(this.activeGoalId)! : null,
      pending: pending.slice(0, DISPLAY_CAP),
      decisions: active,
      revoked,
      backlog: Math.max(0, pending.length - DISPLAY_CAP),
    };
  }

  addOptimistic(action: OptimisticAction): void {
    this.pendingActions.push(action);
  }

  rollback(requestId: string): void {
    this.pendingActions = this.pendingActions.filter((a) => a.requestId !== requestId);
  }

  isActionPending(kind: ActionKind, target?: string): boolean {
    return this.pendingActions.some((a) => a.kind === kind && (target === undefined || a.target === target));
  }
}

/** Does this server event settle (confirm) the optimistic action? */
export function actionSettledBy(action: OptimisticAction, event: SessionEvent): boolean {
  const p = event.payload as Payloads;
  switch (action.kind) {
    case 'answer':
      return event.kind === 'QuestionAnswered' && p.question_id === action.target;
    case 'dismiss':
      return event.kind === 'QuestionDismissed' && p.question_id === action.target;
    case 'custom':
      return event.kind === 'DecisionRecorded' && p.origin === 'custom' && p.title === action.target;
    case 'edit':
      return event.kind === 'DecisionRevised' && p.decision_id === action.target;
    case 'revoke':
      return event.kind === 'DecisionRevoked' && p.decision_id === action.target;
    case 'implement':
      return event.kind === 'ImplementTriggered';
    case 'validate':
      return event.kind === 'ValidationCompleted';
  }
}
