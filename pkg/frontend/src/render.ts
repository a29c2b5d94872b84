// DOM construction for the three panels. Values land in the DOM exactly as
// the API sent them; formatting is display-only.

import { PAGE_SIZE, pageLabel, pageSlice } from "./paging.js";
import type { VisibleRow } from "./tree.js";
import type { Evidence, TreeNode, Violation } from "./types.js";

export function el(tag: string, className?: string, text?: string): HTMLElement {
	const node = document.createElement(tag);
	if (className) node.className = className;
	if (text !== undefined) node.textContent = text;
	return node;
}

export function renderTreeRows(
	container: HTMLElement,
	rows: VisibleRow[],
	selectedPath: string | null,
	onToggle: (path: string) => void,
	onSelect: (path: string) => void,
): void {
	container.replaceChildren();
	if (rows.length === 1 && !rows[0].hasChildren && rows[0].hitCount === 0) {
		container.appendChild(el("p", "empty", "no detections"));
		return;
	}
	for (const row of rows) {
		const line = el("div", "tree-row" + (row.path === selectedPath ? " selected" : ""));
		line.style.paddingLeft = `${row.depth * 18}px`;
		const toggle = el("span", "toggle",
			row.hasChildren ? (row.expanded ? "▾" : "▸") : "·");
		if (row.hasChildren) {
			toggle.addEventListener("click", (ev) => {
				ev.stopPropagation();
				onToggle(row.path);
			});
		}
		line.appendChild(toggle);
		line.appendChild(el("span", "label", row.label));
		line.appendChild(el("span", "count", `[${row.hitCount}]`));
		line.addEventListener("click", () => onSelect(row.path));
		container.appendChild(line);
	}
}

function ts(value: number): string {
	return new Date(value * 1000).toISOString().replace("T", " ").replace("Z", "");
}

export function renderEvidence(
	container: HTMLElement,
	node: TreeNode | null,
	page: number,
	onPage: (delta: number) => void,
): void {
	container.replaceChildren();
	if (!node) {
		container.appendChild(el("p", "empty", "select a node to list its evidence"));
		return;
	}
	const head = el("h3", undefined, `${node.label} — ${node.hit_count} hits, ` +
		`${node.distinct_count} distinct values`);
	container.appendChild(head);
	if (node.evidence_truncated) {
		container.appendChild(el("p", "note",
			`showing the first ${node.evidence.length} evidence rows`));
	}
	if (!node.evidence.length) {
		container.appendChild(el("p", "empty",
			node.children.length ? "category node; open a leaf for evidence" : "no evidence rows"));
		return;
	}
	const table = el("table") as HTMLTableElement;
	const header = table.insertRow();
	for (const title of ["source", "matched value", "first seen", "last seen"]) {
		header.appendChild(el("th", undefined, title));
	}
	for (const entry of pageSlice<Evidence>(node.evidence, page)) {
		const row = table.insertRow();
		row.insertCell().textContent = `${entry.table}#${entry.row_id}`;
		row.insertCell().textContent = entry.value;
		row.insertCell().textContent = ts(entry.first_ts);
		row.insertCell().textContent = ts(entry.last_ts);
	}
	container.appendChild(table);
	container.appendChild(pager(node.evidence.length, page, onPage));
}

export function pager(total: number, page: number, onPage: (delta: number) => void): HTMLElement {
	const bar = el("div", "pager");
	const prev = el("button", undefined, "←") as HTMLButtonElement;
	const next = el("button", undefined, "→") as HTMLButtonElement;
	prev.disabled = page <= 0;
	next.disabled = (page + 1) * PAGE_SIZE >= total;
	prev.addEventListener("click", () => onPage(-1));
	next.addEventListener("click", () => onPage(+1));
	bar.appendChild(prev);
	bar.appendChild(el("span", undefined, pageLabel(page, total)));
	bar.appendChild(next);
	return bar;
}

export function renderSearchResults(
	container: HTMLElement,
	columns: string[],
	rows: Record<string, unknown>[],
	total: number,
	page: number,
	onPage: (delta: number) => void,
): void {
	container.replaceChildren();
	if (!rows.length) {
		container.appendChild(el("p", "empty", "no matches"));
		return;
	}
	const table = el("table") as HTMLTableElement;
	const header = table.insertRow();
	for (const col of columns) header.appendChild(el("th", undefined, col));
	for (const row of pageSlice(rows, page)) {
		const tr = table.insertRow();
		for (const col of columns) {
			tr.insertCell().textContent = String(row[col] ?? "");
		}
	}
	container.appendChild(table);
	container.appendChild(pager(rows.length, page, onPage));
	if (total > rows.length) {
		container.appendChild(el("p", "note",
			`${total} total matches; the service returned the first ${rows.length}`));
	}
}

export function renderViolations(form: HTMLElement, byField: Record<string, string>): void {
	for (const note of Array.from(form.querySelectorAll(".violation"))) note.remove();
	for (const [field, message] of Object.entries(byField)) {
		const input = form.querySelector(`[name="${field}"]`);
		if (input && input.parentElement) {
			input.parentElement.appendChild(el("span", "violation", message));
		}
	}
}

export function banner(text: string, kind: "error" | "ok"): void {
	const zone = document.getElementById("banner");
	if (!zone) return;
	zone.replaceChildren(el("div", `banner ${kind}`, text));
	if (kind === "ok") setTimeout(() => zone.replaceChildren(), 4000);
}

export function violationList(violations: Violation[]): string {
	return violations.map((v) => `${v.code}: ${v.message}`).join("; ");
}
