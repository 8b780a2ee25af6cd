/**
 * HTTP client for the annotation service.
 *
 * All annotator traffic carries the per-annotator token header; server-side
 * validation failures (ties, partial rankings, screening gates) arrive as
 * 4xx responses whose detail message is surfaced verbatim in the UI.
 */

import type {
  McqValidationPayload,
  ScreeningResult,
  SubmissionReceipt,
  TaskView,
} from './types';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/** Connection-level failure (server unreachable, fetch rejected). */
export class NetworkError extends Error {}

async function parseDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === 'string') return body.detail;
    return JSON.stringify(body.detail ?? body);
  } catch {
    return response.statusText;
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    readonly token: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, {
        method,
        headers: {
          'content-type': 'application/json',
          'x-annotator-token': this.token,
        },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new NetworkError(String(err));
    }
    if (!response.ok) {
      throw new ApiError(response.status, await parseDetail(response));
    }
    return (await response.json()) as T;
  }

  async screening(answers: string[]): Promise<ScreeningResult> {
    return this.request('POST', '/screening', { answers });
  }

  async listTasks(kind?: string): Promise<TaskView[]> {
    const query = kind ? `?kind=${encodeURIComponent(kind)}` : '';
    const data = await this.request<{ tasks: TaskView[] }>(
      'GET',
      `/tasks${query}`,
    );
    return data.tasks;
  }

  async getTask(taskId: string): Promise<TaskView> {
    return this.request('GET', `/tasks/${encodeURIComponent(taskId)}`);
  }

  async submitRanking(
    taskId: string,
    permutation: string[],
  ): Promise<SubmissionReceipt> {
    return this.request(
      'POST',
      `/tasks/${encodeURIComponent(taskId)}/ranking`,
      { permutation },
    );
  }

  async submitMcqValidation(
    taskId: string,
    payload: McqValidationPayload,
  ): Promise<SubmissionReceipt> {
    return this.request(
      'POST',
      `/tasks/${encodeURIComponent(taskId)}/mcq-validation`,
      payload,
    );
  }
}
