// App bootstrap: tab wiring and state. All state is in-memory and rebuilt
// from the API on load, so a full page reload reproduces identical content.
import { Api, ApiError } from "./api.js";
import { clampPage } from "./paging.js";
import { banner, el, renderEvidence, renderSearchResults, renderTreeRows, renderViolations, violationList, } from "./render.js";
import { canSave, emptyDraft, upsertRule, validateDraft, violationsByField } from "./rules.js";
import { findNode, flattenTree } from "./tree.js";
const api = new Api("");
const treeState = { doc: null, expanded: new Set(), selectedPath: null, evidencePage: 0 };
let schema = { tables: {} };
let ruleset = { format_version: 1, rules: [] };
let draft = emptyDraft();
let searchPage = 0;
function byId(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing #${id}`);
    return node;
}
// -- tree panel ---------------------------------------------------------------
function redrawTree() {
    const doc = treeState.doc;
    if (!doc)
        return;
    if (treeState.selectedPath && !findNode(doc.tree, treeState.selectedPath)) {
        treeState.selectedPath = null; // the selected node must exist in the fetched tree
        treeState.evidencePage = 0;
    }
    renderTreeRows(byId("tree"), flattenTree(doc.tree, treeState.expanded), treeState.selectedPath, (path) => {
        if (treeState.expanded.has(path))
            treeState.expanded.delete(path);
        else
            treeState.expanded.add(path);
        redrawTree();
    }, (path) => {
        treeState.selectedPath = path;
        treeState.evidencePage = 0;
        redrawTree();
    });
    const node = treeState.selectedPath ? findNode(doc.tree, treeState.selectedPath) : null;
    renderEvidence(byId("evidence"), node, treeState.evidencePage, (delta) => {
        const count = node ? node.evidence.length : 0;
        treeState.evidencePage = clampPage(treeState.evidencePage + delta, count);
        redrawTree();
    });
    const skipped = byId("skipped");
    skipped.replaceChildren();
    for (const s of doc.skipped_rules) {
        skipped.appendChild(el("p", "note", `rule ${s.rule_id} skipped: ${s.reason}`));
    }
}
async function refreshTree() {
    try {
        treeState.doc = await api.getTree();
        redrawTree();
    }
    catch (err) {
        banner(`cannot load tree: ${describe(err)} — retry when the service is back`, "error");
    }
}
// -- search panel ---------------------------------------------------------------
function searchColumns(selector) {
    const table = selector.split(".")[0];
    const tsCol = table === "flows" ? "first_ts" : table === "capture_files" ? "position" : "ts";
    return ["id", tsCol, ...(selector.includes(".") ? [selector.split(".")[1]] : [])];
}
async function runSearch() {
    const selector = byId("search-selector").value;
    const q = byId("search-q").value;
    const mode = byId("search-mode").value;
    if (!selector || !q)
        return;
    try {
        const resp = await api.search(selector, q, mode);
        searchPage = 0;
        const draw = () => renderSearchResults(byId("search-results"), searchColumns(selector), resp.rows, resp.total, searchPage, (delta) => {
            searchPage = clampPage(searchPage + delta, resp.rows.length);
            draw();
        });
        draw();
    }
    catch (err) {
        byId("search-results").replaceChildren(el("p", "violation", describe(err)));
    }
}
// -- rule editor ---------------------------------------------------------------
function draftFromForm(form) {
    const data = new FormData(form);
    return {
        rule_id: String(data.get("rule_id") ?? ""),
        selector: String(data.get("selector") ?? ""),
        result_name: String(data.get("result_name") ?? ""),
        parent_path: String(data.get("parent_path") ?? ""),
        pattern: String(data.get("pattern") ?? ""),
        mode: data.get("mode") === "exact" ? "exact" : "partial",
        enabled: true,
    };
}
function redrawRuleList() {
    const list = byId("rule-list");
    list.replaceChildren();
    for (const rule of ruleset.rules) {
        const row = el("div", "rule-row");
        row.appendChild(el("code", undefined, rule.rule_id));
        row.appendChild(el("span", undefined, ` ${rule.selector} ~ "${rule.pattern}" (${rule.mode}) -> ` +
            `${rule.parent_path ? rule.parent_path + "/" : ""}${rule.result_name}` +
            (rule.enabled ? "" : " [disabled]")));
        const edit = el("button", undefined, "edit");
        edit.addEventListener("click", () => {
            draft = { ...rule };
            fillForm();
            revalidate();
        });
        row.appendChild(edit);
        list.appendChild(row);
    }
}
function fillForm() {
    const form = byId("rule-form");
    for (const [key, value] of Object.entries(draft)) {
        const input = form.querySelector(`[name="${key}"]`);
        if (input)
            input.value = String(value);
    }
}
function revalidate() {
    const form = byId("rule-form");
    draft = draftFromForm(form);
    const violations = validateDraft(draft, schema);
    renderViolations(form, violationsByField(violations));
    byId("rule-save").disabled = !canSave(violations);
    byId("rule-preview").disabled =
        violations.some((v) => ["UnknownSelector", "EmptyPattern", "BadMode"].includes(v.code));
}
async function previewDraft() {
    try {
        const resp = await api.preview(draft);
        byId("preview-result").replaceChildren(el("span", "badge", `${resp.hit_count} hits`), el("span", "note", resp.sample.length
            ? ` sample: ${resp.sample.slice(0, 3).map((r) => String(r["_matched"])).join(" | ")}`
            : " no matching rows"));
    }
    catch (err) {
        byId("preview-result").replaceChildren(el("span", "violation", describe(err)));
    }
}
async function saveDraft() {
    const next = upsertRule(ruleset, draft);
    try {
        await api.putRules(next);
        ruleset = next;
        banner(`saved rule ${draft.rule_id}`, "ok");
        redrawRuleList();
        await refreshTree(); // the tree must reflect the new rule immediately
    }
    catch (err) {
        if (err instanceof ApiError && err.violations.length) {
            renderViolations(byId("rule-form"), violationsByField(err.violations));
            banner(`not saved: ${violationList(err.violations)}`, "error");
        }
        else {
            banner(`not saved: ${describe(err)}`, "error");
        }
    }
}
// -- bootstrap ---------------------------------------------------------------
function describe(err) {
    return err instanceof Error ? err.message : String(err);
}
function showTab(name) {
    for (const section of Array.from(document.querySelectorAll("main > section"))) {
        section.hidden = section.id !== `tab-${name}`;
    }
    for (const link of Array.from(document.querySelectorAll("nav a"))) {
        link.classList.toggle("active", link.getAttribute("data-tab") === name);
    }
}
async function boot() {
    for (const link of Array.from(document.querySelectorAll("nav a"))) {
        link.addEventListener("click", (ev) => {
            ev.preventDefault();
            showTab(link.getAttribute("data-tab") ?? "tree");
        });
    }
    showTab("tree");
    try {
        const run = await api.getRun();
        byId("run-title").textContent =
            `${run.name} — ${run.capture_files.length} capture file(s), ` +
                `${run.counters["packets_total"] ?? 0} packets` +
                (run.incomplete ? " (RUN NOT FINALIZED)" : "");
    }
    catch (err) {
        banner(`service unreachable: ${describe(err)}`, "error");
        return;
    }
    schema = await api.getSchema();
    const select = byId("search-selector");
    const ruleSelect = byId("rule-form").querySelector('[name="selector"]');
    for (const [table, columns] of Object.entries(schema.tables)) {
        for (const column of columns) {
            const value = `${table}.${column}`;
            select.appendChild(new Option(value, value));
            ruleSelect.appendChild(new Option(value, value));
        }
    }
    try {
        ruleset = await api.getRules();
    }
    catch {
        ruleset = { format_version: 1, rules: [] };
    }
    redrawRuleList();
    fillForm();
    revalidate();
    byId("search-go").addEventListener("click", runSearch);
    byId("search-q").addEventListener("keydown", (ev) => {
        if (ev.key === "Enter")
            runSearch();
    });
    byId("search-mode").addEventListener("change", runSearch); // toggling re-queries
    byId("search-selector").addEventListener("change", runSearch);
    byId("rule-form").addEventListener("input", revalidate);
    byId("rule-preview").addEventListener("click", previewDraft);
    byId("rule-save").addEventListener("click", saveDraft);
    byId("rule-new").addEventListener("click", () => {
        draft = emptyDraft();
        fillForm();
        revalidate();
        byId("preview-result").replaceChildren();
    });
    await refreshTree();
}
boot();
