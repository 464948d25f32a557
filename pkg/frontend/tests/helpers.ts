import { TaskView } from "../src/api.js";

export function makeTask(overrides: Partial<TaskView> = {}): TaskView {
  return {
    task_id: "task-1",
    claim: {
      text: "A photo shows a flooded street in Valencia",
      images: ["Y2xhaW0taW1hZ2U="],
      date: "2023-04-01",
      location: null,
      metadata: {},
    },
    predicted_evidence: [
      { text: "The photo was first published in 2019.", images: [], url: "https://e.com/a" },
    ],
    reference_evidence: [
      {
        text: "Original post [IMG_1]",
        images: [{ b64: "Y2xhaW0taW1hZ2U=", claim_image: true }],
        url: "https://e.com/gold",
      },
    ],
    rated: false,
    ...overrides,
  };
}

export interface FakeCall {
  url: string;
  method: string;
  body: unknown;
}

/** fetch stub returning queued responses; records every call. */
export function fakeFetch(
  responder: (url: string, init?: RequestInit) => { status: number; body: unknown },
): { fetch: typeof fetch; calls: FakeCall[] } {
  const calls: FakeCall[] = [];
  const impl = async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : null,
    });
    const { status, body } = responder(url, init);
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    } as Response;
  };
  return { fetch: impl as typeof fetch, calls };
}
