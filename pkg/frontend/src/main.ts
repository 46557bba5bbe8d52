/** Browser bootstrap: wires state, stream, actions, and DOM together. */

import { ApiClient, newRequestId } from './api.js';
import { ActionDispatcher } from './actions.js';
import { bankViewModel, detailViewModel, renderBankHtml, renderChecklistHtml, renderDetailHtml } from './render.js';
import { ConsoleState } from './state.js';
import type { SessionEvent } from './types.js';

const api = new ApiClient('');
const state = new ConsoleState();
const dispatcher = new ActionDispatcher(api, state);

const root = document.getElementById('app')!;
const detailRoot = document.getElementById('detail')!;
const banner = document.getElementById('banner')!;

dispatcher.onError = (error) => {
  banner.textContent = `${error.envelope.code}: ${error.envelope.message}`;
  banner.classList.add('visible');
  setTimeout(() => banner.classList.remove('visible'), 5000);
};
dispatcher.onChange = render;

function render(): void {
  root.innerHTML = renderBankHtml(bankViewModel(state));
}

async function openDetail(questionId: string): Promise<void> {
  try {
    const question = await api.getQuestion(questionId);
    state.openQuestionId = questionId;
    detailRoot.innerHTML = renderDetailHtml(detailViewModel(question));
  } catch {
    banner.textContent = 'Question not found (it may have been resolved).';
    banner.classList.add('visible');
    setTimeout(() => banner.classList.remove('visible'), 3000);
  }
}

function closeDetail(): void {
  state.openQuestionId = null;
  detailRoot.innerHTML = '';
}

root.addEventListener('click', (event) => {
  const target = event.target as HTMLElement;
  const bubble = target.closest('.bubble-open') as HTMLElement | null;
  if (bubble) {
    void openDetail(bubble.dataset.question!);
    return;
  }
  if (target.id === 'implement') {
    void dispatcher.implement();
    return;
  }
  if (target.id === 'validate') {
    void dispatcher.validate().then(async (outcome) => {
      if (outcome.ok) {
        const report = await api.latestReport();
        document.getElementById('report')!.innerHTML = renderChecklistHtml(report.checklist ?? []);
      }
    });
    return;
  }
  const row = target.closest('.decision:not(.struck)') as HTMLElement | null;
  if (row && row.dataset.decision && !row.classList.contains('pending')) {
    const comment = prompt('Edit comment for this decision:');
    if (comment !== null) {
      void dispatcher.edit(row.dataset.decision, { comment });
    }
  }
});

root.addEventListener('keydown', (event) => {
  const target = event.target as HTMLInputElement;
  if ((event as KeyboardEvent).key !== 'Enter') return;
  if (target.id === 'goal-input' && target.value.trim()) {
    void api.setGoal(target.value.trim(), newRequestId()).then(() => render());
  }
  if (target.id === 'custom-decision' && target.value.trim()) {
    void dispatcher.addCustom(target.value.trim());
    target.value = '';
  }
});

detailRoot.addEventListener('click', (event) => {
  const target = event.target as HTMLElement;
  if (target.classList.contains('code-ref')) {
    event.preventDefault();
    const panel = document.getElementById('excerpt-panel')!;
    const index = Number(target.dataset.refIndex);
    const questionId = (detailRoot.querySelector('.detail') as HTMLElement).dataset.question!;
    void api.getQuestion(questionId).then((question) => {
      const ref = question.code_refs[index];
      panel.textContent = ref.excerpt || '(excerpt unavailable)';
      panel.hidden = false;
    });
    return;
  }
  const questionId = (target as HTMLElement).dataset.question;
  if (!questionId) return;
  if (target.id === 'answer-yes' || target.id === 'answer-no') {
    const comment = (document.getElementById('answer-comment') as HTMLTextAreaElement).value;
    void dispatcher.answer(questionId, target.id === 'answer-yes' ? 'yes' : 'no', comment).then(closeDetail);
  } else if (target.id === 'dismiss') {
    void dispatcher.dismiss(questionId).then(closeDetail);
  }
});

function connectStream(): void {
  const source = new EventSource(api.eventsUrl(state.streamCursor));
  source.onmessage = (message) => {
    const event = JSON.parse(message.data) as SessionEvent;
    state.applyServerEvent(event);
    render();
  };
  source.onerror = () => {
    source.close();
    setTimeout(connectStream, 1000);
  };
}

render();
connectStream();
