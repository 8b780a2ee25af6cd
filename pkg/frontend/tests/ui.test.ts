// @vitest-environment jsdom
import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api';
import { renderMcqTask, renderRankingTask } from '../src/ui';
import type { McqTaskView, RankingTaskView } from '../src/types';

const HIDDEN_SYSTEMS = ['base', 'dpo-data', 'ppo-reward', 'human'];

function rankingTask(): RankingTaskView {
  return {
    task_id: 'rank-7',
    kind: 'ranking',
    context: 'Sore throat\nBody text\nDoctor: Any fever?\nPatient: No.',
    candidates: [
      { label: 'c0', text: 'How long has this lasted?' },
      { label: 'c1', text: 'Any fever or chills?' },
      { label: 'c2', text: 'Any trouble swallowing?' },
    ],
  };
}

function mcqTask(): McqTaskView {
  return {
    task_id: 'mcq-7',
    kind: 'mcq_validation',
    question: 'Most likely cause?',
    options: { A: 'Viral', B: 'Strep', C: 'Allergy', D: 'Reflux' },
    none_option: 'none_of_the_above',
  };
}

function clientWith(
  handler: (path: string, init?: RequestInit) => Response | Promise<Response>,
): ApiClient {
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) =>
    handler(String(input), init)) as typeof fetch;
  return new ApiClient('http://service', 'token-1', fetchFn);
}

function okJson(body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status: 200,
    headers: { 'content-type': 'application/json' },
  });
}

describe('renderRankingTask', () => {
  it('renders blinded cards with role-tagged context', () => {
    const view = renderRankingTask(
      rankingTask(),
      clientWith(() => okJson({})),
      window.localStorage,
      'ann1',
    );
    document.body.appendChild(view.root);
    const html = view.root.outerHTML;
    for (const system of HIDDEN_SYSTEMS) {
      expect(html).not.toContain(system);
    }
    expect(view.root.querySelectorAll('.candidate-card')).toHaveLength(3);
    expect(view.root.querySelector('.turn-doctor')?.textContent).toContain(
      'Any fever?',
    );
    view.root.remove();
  });

  it('submit starts enabled (default order is a valid permutation)', () => {
    const view = renderRankingTask(
      rankingTask(),
      clientWith(() => okJson({})),
      window.localStorage,
      'ann1',
    );
    expect(view.submitButton.disabled).toBe(false);
  });

  it('arrow buttons reorder and persist a draft', () => {
    window.localStorage.clear();
    const view = renderRankingTask(
      rankingTask(),
      clientWith(() => okJson({})),
      window.localStorage,
      'ann2',
    );
    document.body.appendChild(view.root);
    const upButtons = view.root.querySelectorAll<HTMLButtonElement>('.nudge-up');
    upButtons[1]!.click();
    expect(view.state.order()).toEqual(['c1', 'c0', 'c2']);

    // A fresh render (simulated refresh) restores the draft.
    const reloaded = renderRankingTask(
      rankingTask(),
      clientWith(() => okJson({})),
      window.localStorage,
      'ann2',
    );
    expect(reloaded.state.order()).toEqual(['c1', 'c0', 'c2']);
    view.root.remove();
  });

  it('surfaces a server-side tie rejection inline', async () => {
    const detail =
      "ranking repeats candidate labels ['c0'] (ties are not allowed)";
    const view = renderRankingTask(
      rankingTask(),
      clientWith(
        () =>
          new Response(JSON.stringify({ detail }), {
            status: 422,
            headers: { 'content-type': 'application/json' },
          }),
      ),
      window.localStorage,
      'ann3',
    );
    document.body.appendChild(view.root);
    view.submitButton.click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(view.errorBanner.hidden).toBe(false);
    expect(view.errorBanner.textContent).toContain('ties are not allowed');
    expect(view.submitButton.disabled).toBe(false);
    view.root.remove();
  });

  it('keeps the local order on network failure and prompts a retry', async () => {
    const view = renderRankingTask(
      rankingTask(),
      clientWith(() => {
        throw new TypeError('fetch failed');
      }),
      window.localStorage,
      'ann4',
    );
    document.body.appendChild(view.root);
    view.root.querySelectorAll<HTMLButtonElement>('.nudge-up')[2]!.click();
    const before = view.state.order();
    view.submitButton.click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(view.errorBanner.textContent).toContain('retry');
    expect(view.state.order()).toEqual(before);
    view.root.remove();
  });

  it('marks the task submitted on success', async () => {
    let submitted: string[] | null = null;
    const view = renderRankingTask(
      rankingTask(),
      clientWith(async (_path, init) => {
        submitted = (JSON.parse(String(init?.body)) as { permutation: string[] })
          .permutation;
        return okJson({ status: 'stored', task_id: 'rank-7' });
      }),
      window.localStorage,
      'ann5',
    );
    view.submitButton.click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(submitted).toEqual(['c0', 'c1', 'c2']);
    expect(view.root.classList.contains('submitted')).toBe(true);
  });
});

describe('renderMcqTask', () => {
  it('submit stays disabled until required fields are chosen', () => {
    const view = renderMcqTask(mcqTask(), clientWith(() => okJson({})));
    document.body.appendChild(view.root);
    expect(view.submitButton.disabled).toBe(true);
    (view.root.querySelector('.plausible-yes') as HTMLButtonElement).click();
    expect(view.submitButton.disabled).toBe(true);
    (
      view.root.querySelector('[data-value="B"]') as HTMLButtonElement
    ).click();
    expect(view.submitButton.disabled).toBe(false);
    view.root.remove();
  });

  it('posts none-of-the-above with free text', async () => {
    let body: unknown;
    const view = renderMcqTask(
      mcqTask(),
      clientWith(async (_path, init) => {
        body = JSON.parse(String(init?.body));
        return okJson({ status: 'stored' });
      }),
    );
    document.body.appendChild(view.root);
    (view.root.querySelector('.plausible-no') as HTMLButtonElement).click();
    (
      view.root.querySelector(
        '[data-value="none_of_the_above"]',
      ) as HTMLButtonElement
    ).click();
    const textarea = view.root.querySelector(
      '.free-text',
    ) as HTMLTextAreaElement;
    textarea.value = 'Mononucleosis';
    textarea.dispatchEvent(new Event('input'));
    view.submitButton.click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(body).toEqual({
      plausible: false,
      selection: 'none_of_the_above',
      free_text: 'Mononucleosis',
    });
    view.root.remove();
  });
});
