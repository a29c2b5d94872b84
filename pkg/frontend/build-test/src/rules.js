// Client-side draft validation mirroring the service's checks, so the
// editor can disable save and annotate fields before any network call.
// The server re-validates on PUT regardless.
export function emptyDraft() {
    return { rule_id: "", selector: "", result_name: "", parent_path: "",
        pattern: "", mode: "partial", enabled: true };
}
export function validateDraft(draft, schema) {
    const out = [];
    const rid = draft.rule_id;
    if (!rid)
        out.push({ code: "EmptyId", message: "rule id must be non-empty", rule_id: rid });
    const dot = draft.selector.indexOf(".");
    const table = dot < 0 ? "" : draft.selector.slice(0, dot);
    const column = dot < 0 ? "" : draft.selector.slice(dot + 1);
    if (!(schema.tables[table] ?? []).includes(column)) {
        out.push({ code: "UnknownSelector",
            message: `selector '${draft.selector}' does not name a searchable column`,
            rule_id: rid });
    }
    if (!draft.result_name)
        out.push({ code: "EmptyName", message: "result_name must be non-empty", rule_id: rid });
    if (draft.parent_path && draft.parent_path.split("/").some((seg) => !seg)) {
        out.push({ code: "EmptyPathSegment",
            message: `parent_path '${draft.parent_path}' has an empty segment`, rule_id: rid });
    }
    if (!draft.pattern)
        out.push({ code: "EmptyPattern", message: "pattern must be non-empty", rule_id: rid });
    if (draft.mode !== "partial" && draft.mode !== "exact") {
        out.push({ code: "BadMode", message: "mode must be partial or exact", rule_id: rid });
    }
    return out;
}
/** Save stays disabled while the draft has violations. */
export function canSave(violations) {
    return violations.length === 0;
}
export function upsertRule(doc, draft) {
    const rule = { ...draft };
    const rules = doc.rules.slice();
    const idx = rules.findIndex((r) => r.rule_id === rule.rule_id);
    if (idx >= 0)
        rules[idx] = rule;
    else
        rules.push(rule);
    return { format_version: doc.format_version, rules };
}
export function violationsByField(violations) {
    const fieldOf = {
        EmptyId: "rule_id", UnknownSelector: "selector", EmptyName: "result_name",
        EmptyPathSegment: "parent_path", EmptyPattern: "pattern", BadMode: "mode",
        DuplicateId: "rule_id",
    };
    const out = {};
    for (const v of violations) {
        const field = fieldOf[v.code] ?? "rule_id";
        if (!(field in out))
            out[field] = v.message;
    }
    return out;
}
