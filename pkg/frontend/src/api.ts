/** Client for the primary service's /annotation endpoints.
 *
 * The payloads are blind by design: no team identity and no automatic
 * score ever reach this client, and task ids are opaque tokens.
 */

export interface EvidenceImage {
  b64: string;
  claim_image: boolean;
}

export interface PredictedEvidence {
  text: string;
  images: string[]; // base64, positional for [IMG_k] placeholders
  url: string;
}

export interface ReferenceEvidence {
  text: string;
  images: EvidenceImage[];
  url: string;
}

export interface ClaimView {
  text: string;
  images: string[];
  date: string | null;
  location: string | null;
  metadata: Record<string, string>;
}

export interface TaskView {
  task_id: string;
  claim: ClaimView;
  predicted_evidence: PredictedEvidence[];
  reference_evidence: ReferenceEvidence[];
  rated: boolean;
}

export interface TaskList {
  annotator: string;
  tasks: TaskView[];
}

export interface Auth {
  token?: string;
  annotator?: string;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly auth: Auth,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private url(path: string): string {
    const u = new URL(path, this.baseUrl);
    if (!this.auth.token && this.auth.annotator) {
      u.searchParams.set("annotator", this.auth.annotator);
    }
    return u.toString();
  }

  private headers(): Record<string, string> {
    const h: Record<string, string> = { "Content-Type": "application/json" };
    if (this.auth.token) {
      h["X-Annotator-Token"] = this.auth.token;
    }
    return h;
  }

  async fetchTasks(): Promise<TaskList> {
    const resp = await this.fetchImpl(this.url("/annotation/tasks"), {
      headers: this.headers(),
    });
    if (!resp.ok) {
      throw new ApiError(`task fetch failed: ${resp.status}`, resp.status);
    }
    return (await resp.json()) as TaskList;
  }

  async submitRating(
    taskId: string,
    coverage: number,
    relevance: number,
  ): Promise<void> {
    const resp = await this.fetchImpl(this.url("/annotation/ratings"), {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ task_id: taskId, coverage, relevance }),
    });
    if (!resp.ok) {
      throw new ApiError(`rating submit failed: ${resp.status}`, resp.status);
    }
  }
}
