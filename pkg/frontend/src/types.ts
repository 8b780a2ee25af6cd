/** Payload shapes served by the annotation service. */

export interface CandidateCard {
  label: string;
  text: string;
}

export interface RankingTaskView {
  task_id: string;
  kind: 'ranking';
  context: string;
  candidates: CandidateCard[];
}

export interface McqTaskView {
  task_id: string;
  kind: 'mcq_validation';
  question: string;
  options: Record<string, string>;
  none_option: string;
}

export type TaskView = RankingTaskView | McqTaskView;

export interface SubmissionReceipt {
  status: string;
  task_id: string;
  replaced_prior: boolean;
}

export interface ScreeningResult {
  annotator_id: string;
  score: number;
  passed: boolean;
}

export interface McqValidationPayload {
  plausible: boolean;
  selection: string;
  free_text?: string;
}
