// Snapshot fidelity against documents captured from the real service
// (regenerate with tools/make_fixtures.py). The rendered tree must show
// the API's labels and counts byte-for-byte, and the editor's preview
// count must equal what a CLI evaluation of the same rule reports.

import assert from "node:assert/strict";
import { readFileSync } from "node:fs";
import { test } from "node:test";

import { allPaths, flattenTree, treeLines } from "../src/tree.js";
import type { TreeDoc, TreeNode } from "../src/types.js";

const fixture = (name: string) =>
	readFileSync(new URL(`../../tests/fixtures/${name}`, import.meta.url), "utf-8");

const treeDoc: TreeDoc = JSON.parse(fixture("tree.json"));

test("rendered labels and counts equal the API tree byte-for-byte", () => {
	// independent walk of the raw document, no renderer code involved
	const expected: string[] = [];
	const walk = (node: TreeNode, depth: number) => {
		expected.push(`${"  ".repeat(depth)}${node.label} [${node.hit_count}]`);
		for (const child of node.children) walk(child, depth + 1);
	};
	walk(treeDoc.tree, 0);
	assert.deepEqual(treeLines(treeDoc.tree), expected);
});

test("every visible row carries the API hit_count unmodified", () => {
	const counts = new Map<string, number>();
	const walk = (node: TreeNode, parent: string) => {
		const path = parent ? `${parent}/${node.label}` : node.label;
		counts.set(path, node.hit_count);
		for (const child of node.children) walk(child, path);
	};
	walk(treeDoc.tree, "");
	const rows = flattenTree(treeDoc.tree, new Set(allPaths(treeDoc.tree)));
	assert.equal(rows.length, counts.size);
	for (const row of rows) {
		assert.equal(row.hitCount, counts.get(row.path));
	}
});

test("fixture tree carries real evidence rows for leaves", () => {
	let leaves = 0;
	const walk = (node: TreeNode) => {
		if (!node.children.length) {
			leaves += 1;
			assert.equal(node.evidence.length, node.hit_count);
		}
		node.children.forEach(walk);
	};
	walk(treeDoc.tree);
	assert.ok(leaves >= 3);
});

test("rule preview hit_count equals CLI evaluation of the same rule", () => {
	const preview = JSON.parse(fixture("preview.json"));
	assert.equal(typeof preview.api_preview_hit_count, "number");
	assert.equal(preview.api_preview_hit_count, preview.cli_evaluation_hit_count);
});
