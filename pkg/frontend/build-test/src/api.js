// Thin typed client over the read-only analysis API. Every number the UI
// shows comes from these responses; nothing is recomputed client-side.
export class ApiError extends Error {
    constructor(status, message, violations = []) {
        super(message);
        this.status = status;
        this.violations = violations;
    }
}
async function parseError(resp) {
    let message = `${resp.status} ${resp.statusText}`;
    let violations = [];
    try {
        const doc = await resp.json();
        if (doc.error)
            message = doc.error;
        if (Array.isArray(doc.violations))
            violations = doc.violations;
    }
    catch {
        // non-JSON error body; keep the status line
    }
    return new ApiError(resp.status, message, violations);
}
export class Api {
    constructor(base = "") {
        this.base = base;
    }
    async get(path) {
        const resp = await fetch(this.base + path);
        if (!resp.ok)
            throw await parseError(resp);
        return resp.json();
    }
    async send(path, method, body) {
        const resp = await fetch(this.base + path, {
            method,
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
        if (!resp.ok)
            throw await parseError(resp);
        return resp.json();
    }
    getRun() {
        return this.get("/api/run");
    }
    getSchema() {
        return this.get("/api/schema");
    }
    getTree() {
        return this.get("/api/tree");
    }
    search(selector, q, mode, limit = 1000) {
        const params = new URLSearchParams({ selector, q, mode, limit: String(limit) });
        return this.get(`/api/search?${params}`);
    }
    getRules() {
        return this.get("/api/rules");
    }
    putRules(doc) {
        return this.send("/api/rules", "PUT", doc);
    }
    preview(rule) {
        return this.send("/api/rules/preview", "POST", rule);
    }
}
