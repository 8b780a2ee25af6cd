/**
 * Application shell: token entry, the screening gate, then the task queue.
 * Talks only to the annotation service's HTTP endpoints.
 */

import { ApiClient, ApiError } from './api';
import { renderMcqTask, renderRankingTask } from './ui';

const SCREENING_LENGTH = 4;

export async function startApp(
  root: HTMLElement,
  baseUrl: string,
  token: string,
  annotatorId: string,
): Promise<void> {
  const client = new ApiClient(baseUrl, token);
  root.replaceChildren();

  let tasks;
  try {
    tasks = await client.listTasks();
  } catch (err) {
    if (err instanceof ApiError && err.status === 403) {
      renderScreening(root, client, annotatorId);
      return;
    }
    throw err;
  }
  renderQueue(root, client, annotatorId, tasks);
}

function renderScreening(
  root: HTMLElement,
  client: ApiClient,
  annotatorId: string,
): void {
  const section = document.createElement('section');
  section.className = 'screening';
  const heading = document.createElement('h2');
  heading.textContent = 'Screening';
  section.appendChild(heading);
  const inputs: HTMLInputElement[] = [];
  for (let i = 0; i < SCREENING_LENGTH; i += 1) {
    const input = document.createElement('input');
    input.placeholder = `Answer ${i + 1} (A-D)`;
    inputs.push(input);
    section.appendChild(input);
  }
  const submit = document.createElement('button');
  submit.textContent = 'Submit screening';
  submit.addEventListener('click', async () => {
    const result = await client.screening(
      inputs.map((i) => i.value.trim().toUpperCase()),
    );
    if (result.passed) {
      await startApp(root, client.baseUrl, client.token, annotatorId);
    } else {
      const note = document.createElement('p');
      note.className = 'error-banner';
      note.textContent = `Screening not passed (score ${result.score}).`;
      section.appendChild(note);
    }
  });
  section.appendChild(submit);
  root.appendChild(section);
}

function renderQueue(
  root: HTMLElement,
  client: ApiClient,
  annotatorId: string,
  tasks: Awaited<ReturnType<ApiClient['listTasks']>>,
): void {
  if (tasks.length === 0) {
    const done = document.createElement('p');
    done.textContent = 'No tasks assigned right now.';
    root.appendChild(done);
    return;
  }
  for (const task of tasks) {
    if (task.kind === 'ranking') {
      root.appendChild(
        renderRankingTask(task, client, window.localStorage, annotatorId).root,
      );
    } else {
      root.appendChild(renderMcqTask(task, client).root);
    }
  }
}
