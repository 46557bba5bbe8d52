/**
 * Optimistic action dispatch.
 *
 * Every mutation gets an idempotency id, shows up immediately as a pending
 * overlay entry, and is reconciled by the event stream (or rolled back on
 * error). Singleton actions (implement, validate) reuse the in-flight
 * promise, so a double-click issues exactly one request.
 */

import { ApiClient, ApiError, newRequestId } from './api.js';
import type { ActionKind, ConsoleState } from './state.js';

export interface ActionOutcome {
  ok: boolean;
  error?: ApiError;
}

export class ActionDispatcher {
  private inflightSingletons = new Map<ActionKind, Promise<ActionOutcome>>();
  onError: (error: ApiError) => void = () => {};
  onChange: () => void = () => {};

  constructor(
    private api: ApiClient,
    private state: ConsoleState,
  ) {}

  answer(questionId: string, answer: 'yes' | 'no', comment: string): Promise<ActionOutcome> {
    const question = this.state.questions.get(questionId);
    return this.run('answer', questionId, { title: question?.title ?? questionId, answer, comment }, (id) =>
      this.api.answerQuestion(questionId, answer, comment, id),
    );
  }

  dismiss(questionId: string): Promise<ActionOutcome> {
    return this.run('dismiss', questionId, {}, (id) => this.api.dismissQuestion(questionId, id));
  }

  addCustom(title: string, comment = ''): Promise<ActionOutcome> {
    return this.run('custom', title, { title, comment }, (id) => this.api.addCustomDecision(title, comment, id));
  }

  edit(decisionId: string, fields: { answer?: 'yes' | 'no'; comment?: string; title?: string }): Promise<ActionOutcome> {
    return this.run('edit', decisionId, fields, (id) => this.api.editDecision(decisionId, fields, id));
  }

  revoke(decisionId: string): Promise<ActionOutcome> {
    return this.run('revoke', decisionId, {}, (id) => this.api.revokeDecision(decisionId, id));
  }

  implement(): Promise<ActionOutcome> {
    return this.runSingleton('implement', (id) => this.api.implement(id));
  }

  validate(): Promise<ActionOutcome> {
    return this.runSingleton('validate', (id) => this.api.validate(id));
  }

  private runSingleton(kind: ActionKind, call: (requestId: string) => Promise<unknown>): Promise<ActionOutcome> {
    const existing = this.inflightSingletons.get(kind);
    if (existing) return existing;
    const promise = this.run(kind, kind, {}, call).finally(() => this.inflightSingletons.delete(kind));
    this.inflightSingletons.set(kind, promise);
    return promise;
  }

  private async run(
    kind: ActionKind,
    target: string,
    detail: { title?: string; answer?: 'yes' | 'no'; comment?: string },
    call: (requestId: string) => Promise<unknown>,
  ): Promise<ActionOutcome> {
    const requestId = newRequestId();
    this.state.addOptimistic({ requestId, kind, target, detail });
    this.onChange();
    try {
      await call(requestId);
      return { ok: true };
    } catch (error) {
      this.state.rollback(requestId);
      const apiError =
        error instanceof ApiError
          ? error
          : new ApiError({ code: 'Network', message: String(error), details: {} }, 0);
      this.onError(apiError);
      this.onChange();
      return { ok: false, error: apiError };
    }
  }
}
