// Thin client over the chat service JSON API.

export interface MessageOut {
  response: string;
  intermediate: string;
  entity: string;
  relations: string[];
  objects: string[];
  low_confidence: boolean;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

export class ChatApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async createSession(): Promise<string> {
    const res = await this.fetchFn(`${this.baseUrl}/sessions`, { method: "POST" });
    if (res.status !== 201) {
      throw new ApiError(res.status, await res.text());
    }
    const doc = (await res.json()) as { session_id: string };
    return doc.session_id;
  }

  async sendMessage(sessionId: string, text: string): Promise<MessageOut> {
    const res = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/message`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
    if (!res.ok) {
      throw new ApiError(res.status, await res.text());
    }
    return (await res.json()) as MessageOut;
  }
}
