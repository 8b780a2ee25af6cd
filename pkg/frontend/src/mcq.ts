/**
 * Form state for MCQ validation: plausibility, an answer selection
 * (A-D or none-of-the-above), and an optional free-text alternative.
 * Submission stays blocked client-side until the required fields are set.
 */

import type { McqTaskView, McqValidationPayload } from './types';

export class McqFormState {
  plausible: boolean | null = null;
  selection: string | null = null;
  freeText = '';

  constructor(private readonly task: McqTaskView) {}

  selectableOptions(): string[] {
    return [...Object.keys(this.task.options).sort(), this.task.none_option];
  }

  setSelection(value: string): void {
    if (!this.selectableOptions().includes(value)) {
      throw new Error(`not a selectable option: ${value}`);
    }
    this.selection = value;
  }

  /** Required fields: plausibility answered and an option selected. */
  canSubmit(): boolean {
    return this.plausible !== null && this.selection !== null;
  }

  missingFields(): string[] {
    const missing: string[] = [];
    if (this.plausible === null) missing.push('plausible');
    if (this.selection === null) missing.push('selection');
    return missing;
  }

  payload(): McqValidationPayload {
    if (!this.canSubmit()) {
      throw new Error(
        `form incomplete: missing ${this.missingFields().join(', ')}`,
      );
    }
    const body: McqValidationPayload = {
      plausible: this.plausible!,
      selection: this.selection!,
    };
    if (this.freeText.trim() !== '') {
      body.free_text = this.freeText.trim();
    }
    return body;
  }
}
