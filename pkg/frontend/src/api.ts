// Thin typed client over the read-only analysis API. Every number the UI
// shows comes from these responses; nothing is recomputed client-side.

import type {
	PreviewResponse,
	Rule,
	RulesetDoc,
	RunDoc,
	SchemaDoc,
	SearchResponse,
	TreeDoc,
	Violation,
} from "./types.js";

export class ApiError extends Error {
	status: number;
	violations: Violation[];

	constructor(status: number, message: string, violations: Violation[] = []) {
		super(message);
		this.status = status;
		this.violations = violations;
	}
}

async function parseError(resp: Response): Promise<ApiError> {
	let message = `${resp.status} ${resp.statusText}`;
	let violations: Violation[] = [];
	try {
		const doc = await resp.json();
		if (doc.error) message = doc.error;
		if (Array.isArray(doc.violations)) violations = doc.violations;
	} catch {
		// non-JSON error body; keep the status line
	}
	return new ApiError(resp.status, message, violations);
}

export class Api {
	constructor(public base: string = "") {}

	private async get<T>(path: string): Promise<T> {
		const resp = await fetch(this.base + path);
		if (!resp.ok) throw await parseError(resp);
		return resp.json() as Promise<T>;
	}

	private async send<T>(path: string, method: string, body: unknown): Promise<T> {
		const resp = await fetch(this.base + path, {
			method,
			headers: { "Content-Type": "application/json" },
			body: JSON.stringify(body),
		});
		if (!resp.ok) throw await parseError(resp);
		return resp.json() as Promise<T>;
	}

	getRun(): Promise<RunDoc> {
		return this.get("/api/run");
	}

	getSchema(): Promise<SchemaDoc> {
		return this.get("/api/schema");
	}

	getTree(): Promise<TreeDoc> {
		return this.get("/api/tree");
	}

	search(selector: string, q: string, mode: string, limit = 1000): Promise<SearchResponse> {
		const params = new URLSearchParams({ selector, q, mode, limit: String(limit) });
		return this.get(`/api/search?${params}`);
	}

	getRules(): Promise<RulesetDoc> {
		return this.get("/api/rules");
	}

	putRules(doc: RulesetDoc): Promise<{ ok: boolean; rules: number }> {
		return this.send("/api/rules", "PUT", doc);
	}

	preview(rule: Partial<Rule>): Promise<PreviewResponse> {
		return this.send("/api/rules/preview", "POST", rule);
	}
}
