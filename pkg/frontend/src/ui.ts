/**
 * DOM views: ranking board with drag and keyboard reordering, MCQ form,
 * and an inline error banner for server rejections.
 *
 * Candidate cards show only the blinded label and text from the service
 * payload; there is no provenance anywhere in the DOM. Reordering calls
 * back into RankingState, and every change persists a draft so a refresh
 * before submit restores the working order.
 */

import { ApiClient, ApiError, NetworkError } from './api';
import type { DraftStorage } from './ranking';
import { RankingState } from './ranking';
import { McqFormState } from './mcq';
import type { McqTaskView, RankingTaskView } from './types';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Render the conversation context as role-tagged turns. */
export function renderContext(context: string): HTMLElement {
  const box = el('div', 'context');
  for (const line of context.split('\n')) {
    const turn = el('p', 'turn');
    if (line.startsWith('Patient:')) turn.classList.add('turn-patient');
    else if (line.startsWith('Doctor:')) turn.classList.add('turn-doctor');
    turn.textContent = line;
    box.appendChild(turn);
  }
  return box;
}

export interface RankingViewHandles {
  root: HTMLElement;
  state: RankingState;
  submitButton: HTMLButtonElement;
  errorBanner: HTMLElement;
}

export function renderRankingTask(
  task: RankingTaskView,
  client: ApiClient,
  storage: DraftStorage,
  annotatorId: string,
  onStored?: () => void,
): RankingViewHandles {
  const state = new RankingState(task);
  state.loadDraft(storage, annotatorId);

  const root = el('section', 'ranking-task');
  root.dataset.taskId = task.task_id;
  root.appendChild(el('h2', 'task-title', 'Rank the follow-up questions'));
  root.appendChild(renderContext(task.context));

  const hint = el(
    'p',
    'hint',
    'Best question on top. Drag cards or use the arrow buttons.',
  );
  root.appendChild(hint);

  const list = el('ol', 'candidate-list');
  root.appendChild(list);

  const errorBanner = el('div', 'error-banner');
  errorBanner.setAttribute('role', 'alert');
  errorBanner.hidden = true;
  root.appendChild(errorBanner);

  const submitButton = el('button', 'submit', 'Submit ranking');
  submitButton.type = 'button';
  root.appendChild(submitButton);

  const textByLabel = new Map(task.candidates.map((c) => [c.label, c.text]));
  let dragFrom: number | null = null;

  function redraw(): void {
    list.replaceChildren();
    state.order().forEach((label, index) => {
      const item = el('li', 'candidate-card');
      item.draggable = true;
      item.dataset.label = label;
      item.appendChild(el('span', 'rank-number', String(index + 1)));
      item.appendChild(
        el('span', 'candidate-text', textByLabel.get(label) ?? ''),
      );

      const up = el('button', 'nudge-up', '▲');
      up.type = 'button';
      up.setAttribute('aria-label', `move question ${index + 1} up`);
      up.addEventListener('click', () => {
        state.nudge(label, 'up');
        persistAndRedraw();
      });
      const down = el('button', 'nudge-down', '▼');
      down.type = 'button';
      down.setAttribute('aria-label', `move question ${index + 1} down`);
      down.addEventListener('click', () => {
        state.nudge(label, 'down');
        persistAndRedraw();
      });
      item.append(up, down);

      item.addEventListener('dragstart', () => {
        dragFrom = index;
      });
      item.addEventListener('dragover', (event) => event.preventDefault());
      item.addEventListener('drop', () => {
        if (dragFrom !== null) {
          state.move(dragFrom, index);
          dragFrom = null;
          persistAndRedraw();
        }
      });
      list.appendChild(item);
    });
    // The default order is a valid permutation, so submit is enabled as
    // long as the ranking stays complete.
    submitButton.disabled = !state.isComplete();
  }

  function persistAndRedraw(): void {
    state.saveDraft(storage, annotatorId);
    redraw();
  }

  function showError(message: string): void {
    errorBanner.textContent = message;
    errorBanner.hidden = false;
  }

  submitButton.addEventListener('click', async () => {
    errorBanner.hidden = true;
    submitButton.disabled = true;
    try {
      await client.submitRanking(task.task_id, state.order());
      state.clearDraft(storage, annotatorId);
      root.classList.add('submitted');
      onStored?.();
    } catch (err) {
      if (err instanceof ApiError) {
        // Server-side rejection (tie, omission, gate): surface inline.
        showError(err.detail);
      } else if (err instanceof NetworkError) {
        showError('Connection failed. Your order is kept; retry to submit.');
      } else {
        showError(String(err));
      }
      submitButton.disabled = !state.isComplete();
    }
  });

  redraw();
  return { root, state, submitButton, errorBanner };
}

export interface McqViewHandles {
  root: HTMLElement;
  state: McqFormState;
  submitButton: HTMLButtonElement;
  errorBanner: HTMLElement;
}

export function renderMcqTask(
  task: McqTaskView,
  client: ApiClient,
  onStored?: () => void,
): McqViewHandles {
  const state = new McqFormState(task);
  const root = el('section', 'mcq-task');
  root.dataset.taskId = task.task_id;
  root.appendChild(el('h2', 'task-title', 'Validate this question'));
  root.appendChild(el('p', 'mcq-question', task.question));

  const plausibleRow = el('div', 'plausible-row');
  plausibleRow.appendChild(el('span', undefined, 'Is the question plausible?'));
  for (const [value, labelText] of [
    ['yes', 'Yes'],
    ['no', 'No'],
  ] as const) {
    const button = el('button', `plausible-${value}`, labelText);
    button.type = 'button';
    button.addEventListener('click', () => {
      state.plausible = value === 'yes';
      refresh();
    });
    plausibleRow.appendChild(button);
  }
  root.appendChild(plausibleRow);

  const optionList = el('div', 'option-list');
  const entries: [string, string][] = [
    ...Object.entries(task.options).sort(([a], [b]) => a.localeCompare(b)),
    [task.none_option, 'None of the above'],
  ];
  for (const [value, text] of entries) {
    const option = el('button', 'option', `${value}: ${text}`);
    option.type = 'button';
    option.dataset.value = value;
    option.addEventListener('click', () => {
      state.setSelection(value);
      refresh();
    });
    optionList.appendChild(option);
  }
  root.appendChild(optionList);

  const freeText = el('textarea', 'free-text');
  freeText.placeholder = 'Alternative answer (used with none of the above)';
  freeText.addEventListener('input', () => {
    state.freeText = freeText.value;
  });
  root.appendChild(freeText);

  const errorBanner = el('div', 'error-banner');
  errorBanner.setAttribute('role', 'alert');
  errorBanner.hidden = true;
  root.appendChild(errorBanner);

  const submitButton = el('button', 'submit', 'Submit validation');
  submitButton.type = 'button';
  root.appendChild(submitButton);

  function refresh(): void {
    submitButton.disabled = !state.canSubmit();
    for (const node of optionList.children) {
      node.classList.toggle(
        'selected',
        (node as HTMLElement).dataset.value === state.selection,
      );
    }
  }

  submitButton.addEventListener('click', async () => {
    errorBanner.hidden = true;
    try {
      await client.submitMcqValidation(task.task_id, state.payload());
      root.classList.add('submitted');
      onStored?.();
    } catch (err) {
      errorBanner.textContent =
        err instanceof ApiError ? err.detail : String(err);
      errorBanner.hidden = false;
    }
  });

  refresh();
  return { root, state, submitButton, errorBanner };
}
