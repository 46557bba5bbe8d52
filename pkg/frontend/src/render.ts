/**
 * View models and HTML for the console surfaces.
 *
 * Rendering is split in two layers so tests can assert on structure
 * without a DOM: `bankViewModel` / `detailViewModel` build plain data,
 * `renderBankHtml` / `renderDetailHtml` turn that into markup.
 */

import type { ConsoleState, OptimisticAction } from './state.js';
import type { BankView, Question } from './types.js';

export const GLYPHS = { passed: '✓', failed: '✗', unmapped: '∅', orphaned: '⊘' } as const;

export interface BubbleVM {
  id: string;
  title: string;
  pending: boolean; // an optimistic action targets it
}

export interface DecisionRowVM {
  id: string;
  title: string;
  badge: 'yes' | 'no' | 'custom';
  comment: string;
  pending: boolean;
  struck: boolean;
}

export interface BankVM {
  goalText: string;
  bubbles: BubbleVM[];
  backlog: number;
  decisions: DecisionRowVM[];
  revoked: DecisionRowVM[];
  provisional: DecisionRowVM[]; // optimistic rows not yet confirmed
  implementPending: boolean;
  validatePending: boolean;
}

export function bankViewModel(state: ConsoleState): BankVM {
  const bank: BankView = state.bank();
  const bubbles = bank.pending
    .filter((q) => !hasAction(state, 'answer', q.id) && !hasAction(state, 'dismiss', q.id))
    .map((q) => ({ id: q.id, title: q.title, pending: false }));
  const decisions = bank.decisions.map((d) => ({
    id: d.id,
    title: d.title,
    badge: badgeOf(d.answer),
    comment: d.comment,
    pending: hasAction(state, 'edit', d.id) || hasAction(state, 'revoke', d.id),
    struck: false,
  }));
  const revoked = bank.revoked.map((d) => ({
    id: d.id,
    title: d.title,
    badge: badgeOf(d.answer),
    comment: d.comment,
    pending: false,
    struck: true,
  }));
  const provisional = state.pendingActions.filter(isRowAction).map(provisionalRow);
  return {
    goalText: bank.goal?.text ?? '',
    bubbles,
    backlog: bank.backlog,
    decisions,
    revoked,
    provisional,
    implementPending: state.isActionPending('implement'),
    validatePending: state.isActionPending('validate'),
  };
}

function badgeOf(answer: string): 'yes' | 'no' | 'custom' {
  return answer === 'not-applicable' ? 'custom' : (answer as 'yes' | 'no');
}

function hasAction(state: ConsoleState, kind: OptimisticAction['kind'], target: string): boolean {
  return state.pendingActions.some((a) => a.kind === kind && a.target === target);
}

function isRowAction(action: OptimisticAction): boolean {
  return action.kind === 'answer' || action.kind === 'custom';
}

function provisionalRow(action: OptimisticAction): DecisionRowVM {
  return {
    id: action.requestId,
    title: action.detail?.title ?? action.target,
    badge: action.kind === 'custom' ? 'custom' : badgeOf(action.detail?.answer ?? 'yes'),
    comment: action.detail?.comment ?? '',
    pending: true,
    struck: false,
  };
}

// ---------------------------------------------------------------------------
// Detail view
// ---------------------------------------------------------------------------

export interface CodeRefLinkVM {
  label: string; // e.g. "app.py:10-12"
  path: string;
  lineStart: number;
  lineEnd: number;
  excerpt: string;
}

export interface DetailVM {
  id: string;
  title: string;
  yesRationale: string;
  noRationale: string;
  refs: CodeRefLinkVM[];
  answerable: boolean;
}

export function detailViewModel(question: Question): DetailVM {
  return {
    id: question.id,
    title: question.title,
    yesRationale: question.yes_rationale,
    noRationale: question.no_rationale,
    refs: question.code_refs.map((ref) => ({
      label: `${ref.path}:${ref.line_start}-${ref.line_end}`,
      path: ref.path,
      lineStart: ref.line_start,
      lineEnd: ref.line_end,
      excerpt: ref.excerpt,
    })),
    answerable: question.status === 'pending',
  };
}

// ---------------------------------------------------------------------------
// HTML
// ---------------------------------------------------------------------------

export function escapeHtml(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;');
}

export function renderBankHtml(vm: BankVM): string {
  const bubbles = vm.bubbles
    .map(
      (b) =>
        `<li class="bubble" data-question="${b.id}"><button class="bubble-open" data-question="${b.id}">${escapeHtml(b.title)}</button></li>`,
    )
    .join('');
  const backlog = vm.backlog > 0 ? `<p class="backlog">+${vm.backlog} more queued</p>` : '';
  const rows = [...vm.decisions, ...vm.provisional]
    .map(
      (d) =>
        `<li class="decision${d.pending ? ' pending' : ''}" data-decision="${d.id}">` +
        `<span class="badge badge-${d.badge}">${d.badge}</span> ` +
        `<span class="title">${escapeHtml(d.title)}</span>` +
        (d.comment ? ` <span class="comment">— ${escapeHtml(d.comment)}</span>` : '') +
        (d.pending ? ' <span class="marker">…</span>' : '') +
        `</li>`,
    )
    .join('');
  const revoked = vm.revoked
    .map((d) => `<li class="decision struck" data-decision="${d.id}"><s>${escapeHtml(d.title)}</s></li>`)
    .join('');
  return `
<section class="goal-field">
  <label>Goal</label>
  <input id="goal-input" value="${escapeHtml(vm.goalText)}" placeholder="Type your high-level goal" />
</section>
<section class="questions">
  <h2>Questions</h2>
  <ul class="bubbles">${bubbles}</ul>
  ${backlog}
</section>
<section class="bank">
  <h2>Decision Bank</h2>
  <ul class="decisions">${rows}</ul>
  <input id="custom-decision" placeholder="Add a custom decision" />
  <details class="revoked-section"><summary>Revoked (${vm.revoked.length})</summary><ul>${revoked}</ul></details>
</section>
<section class="actions">
  <button id="implement" ${vm.implementPending ? 'disabled' : ''}>Implement plan</button>
  <button id="validate" ${vm.validatePending ? 'disabled' : ''}>Validate</button>
</section>`;
}

export function renderDetailHtml(vm: DetailVM): string {
  const refs = vm.refs
    .map(
      (ref, index) =>
        `<a class="code-ref" data-ref-index="${index}" data-path="${escapeHtml(ref.path)}" ` +
        `data-line-start="${ref.lineStart}" data-line-end="${ref.lineEnd}" href="#ref-${index}">${escapeHtml(ref.label)}</a>`,
    )
    .join('');
  const refsSection = vm.refs.length
    ? `<div class="refs"><h3>Relevant code</h3>${refs}<pre id="excerpt-panel" class="excerpt" hidden></pre></div>`
    : '';
  const controls = vm.answerable
    ? `<div class="answer-controls">
  <textarea id="answer-comment" placeholder="Optional comment"></textarea>
  <button id="answer-yes" data-question="${vm.id}">Yes</button>
  <button id="answer-no" data-question="${vm.id}">No</button>
  <button id="dismiss" data-question="${vm.id}">Dismiss</button>
</div>`
    : '<p class="resolved">This question is resolved.</p>';
  return `
<aside class="detail" data-question="${vm.id}">
  <h2>${escapeHtml(vm.title)}</h2>
  <p class="rationale yes"><strong>Yes:</strong> ${escapeHtml(vm.yesRationale)}</p>
  <p class="rationale no"><strong>No:</strong> ${escapeHtml(vm.noRationale)}</p>
  ${refsSection}
  ${controls}
</aside>`;
}

export function renderChecklistHtml(checklist: string[]): string {
  const items = checklist.map((line) => `<li>${escapeHtml(line)}</li>`).join('');
  return `<ul class="checklist">${items}</ul>`;
}
