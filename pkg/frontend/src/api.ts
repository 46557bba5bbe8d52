/** Thin fetch wrapper over the engine API with idempotent mutations. */

import type { BankView, Decision, ErrorEnvelope, Question, ValidationReport } from './types.js';

export class ApiError extends Error {
  constructor(
    public envelope: ErrorEnvelope,
    public status: number,
  ) {
    super(`${envelope.code}: ${envelope.message}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export function newRequestId(): string {
  if (typeof crypto !== 'undefined' && 'randomUUID' in crypto) return crypto.randomUUID();
  return `req-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

export class ApiClient {
  constructor(
    private base: string = '',
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown, requestId?: string): Promise<T> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' };
    if (requestId) headers['X-Request-Id'] = requestId;
    const response = await this.fetchImpl(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const doc = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(doc as ErrorEnvelope, response.status);
    }
    return doc as T;
  }

  getBank(): Promise<BankView> {
    return this.request('GET', '/api/bank');
  }

  getQuestion(id: string): Promise<Question> {
    return this.request('GET', `/api/questions/${id}`);
  }

  setGoal(text: string, requestId: string): Promise<unknown> {
    return this.request('POST', '/api/goal', { text }, requestId);
  }

  answerQuestion(id: string, answer: 'yes' | 'no', comment: string, requestId: string): Promise<Decision> {
    return this.request('POST', `/api/questions/${id}/answer`, { answer, comment }, requestId);
  }

  dismissQuestion(id: string, requestId: string): Promise<Question> {
    return this.request('POST', `/api/questions/${id}/dismiss`, {}, requestId);
  }

  addCustomDecision(title: string, comment: string, requestId: string): Promise<Decision> {
    return this.request('POST', '/api/decisions', { title, comment }, requestId);
  }

  editDecision(
    id: string,
    fields: { answer?: 'yes' | 'no'; comment?: string; title?: string },
    requestId: string,
  ): Promise<Decision> {
    return this.request('PATCH', `/api/decisions/${id}`, fields, requestId);
  }

  revokeDecision(id: string, requestId: string): Promise<Decision> {
    return this.request('DELETE', `/api/decisions/${id}`, {}, requestId);
  }

  implement(requestId: string): Promise<unknown> {
    return this.request('POST', '/api/implement', {}, requestId);
  }

  validate(requestId: string): Promise<ValidationReport> {
    return this.request('POST', '/api/validate', {}, requestId);
  }

  latestReport(): Promise<ValidationReport> {
    return this.request('GET', '/api/report/latest');
  }

  eventsUrl(fromSeq: number): string {
    return `${this.base}/api/events?from=${fromSeq}`;
  }
}
