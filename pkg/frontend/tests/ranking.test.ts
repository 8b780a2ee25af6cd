import { describe, expect, it } from 'vitest';

import { RankingState } from '../src/ranking';
import type { RankingTaskView } from '../src/types';

function task(labels = ['c0', 'c1', 'c2', 'c3']): RankingTaskView {
  return {
    task_id: 'rank-1',
    kind: 'ranking',
    context: 'Title\nBody\nDoctor: Any fever?',
    candidates: labels.map((label, i) => ({ label, text: `Question ${i}?` })),
  };
}

class MemoryStorage {
  private map = new Map<string, string>();
  getItem(key: string): string | null {
    return this.map.get(key) ?? null;
  }
  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
  removeItem(key: string): void {
    this.map.delete(key);
  }
}

describe('RankingState', () => {
  it('initializes from the service order and is already complete', () => {
    const state = new RankingState(task());
    expect(state.order()).toEqual(['c0', 'c1', 'c2', 'c3']);
    expect(state.isComplete()).toBe(true);
    expect(state.touched).toBe(false);
  });

  it('move implements drag-drop semantics', () => {
    const state = new RankingState(task());
    state.move(0, 2);
    expect(state.order()).toEqual(['c1', 'c2', 'c0', 'c3']);
    state.move(3, 0);
    expect(state.order()).toEqual(['c3', 'c1', 'c2', 'c0']);
    expect(state.isComplete()).toBe(true);
  });

  it('move clamps out-of-range targets', () => {
    const state = new RankingState(task());
    state.move(1, 99);
    expect(state.order()).toEqual(['c0', 'c2', 'c3', 'c1']);
    state.move(2, -5);
    expect(state.order()).toEqual(['c3', 'c0', 'c2', 'c1']);
  });

  it('nudge moves one slot and stops at the edges', () => {
    const state = new RankingState(task());
    state.nudge('c2', 'up');
    expect(state.order()).toEqual(['c0', 'c2', 'c1', 'c3']);
    state.nudge('c0', 'up');
    state.nudge('c0', 'up');
    expect(state.order()[0]).toBe('c0');
    state.nudge('c3', 'down');
    expect(state.order()[3]).toBe('c3');
  });

  it('every reachable state is a complete permutation (no ties possible)', () => {
    const state = new RankingState(task());
    let seed = 1;
    for (let i = 0; i < 200; i += 1) {
      seed = (seed * 16807) % 2147483647;
      const from = seed % 4;
      seed = (seed * 16807) % 2147483647;
      const to = seed % 4;
      state.move(from, to);
      expect(state.isComplete()).toBe(true);
    }
  });

  it('draft round-trips through storage', () => {
    const storage = new MemoryStorage();
    const state = new RankingState(task());
    state.move(0, 3);
    state.saveDraft(storage, 'ann1');

    const fresh = new RankingState(task());
    expect(fresh.loadDraft(storage, 'ann1')).toBe(true);
    expect(fresh.order()).toEqual(state.order());
  });

  it('drafts are scoped per annotator and task', () => {
    const storage = new MemoryStorage();
    const state = new RankingState(task());
    state.move(0, 1);
    state.saveDraft(storage, 'ann1');
    const other = new RankingState(task());
    expect(other.loadDraft(storage, 'ann2')).toBe(false);
    expect(other.order()).toEqual(['c0', 'c1', 'c2', 'c3']);
  });

  it('rejects drafts that no longer match the candidate set', () => {
    const storage = new MemoryStorage();
    storage.setItem('ranking-draft:ann1:rank-1', '["c0","c0","c2","c3"]');
    const state = new RankingState(task());
    expect(state.loadDraft(storage, 'ann1')).toBe(false);
    storage.setItem('ranking-draft:ann1:rank-1', 'not json');
    expect(state.loadDraft(storage, 'ann1')).toBe(false);
  });

  it('reset returns to the service shuffle', () => {
    const state = new RankingState(task());
    state.move(0, 3);
    state.reset();
    expect(state.order()).toEqual(['c0', 'c1', 'c2', 'c3']);
    expect(state.touched).toBe(false);
  });
});
