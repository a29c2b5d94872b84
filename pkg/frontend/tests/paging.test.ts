import assert from "node:assert/strict";
import { test } from "node:test";

import { clampPage, pageCount, pageLabel, pageSlice } from "../src/paging.js";

test("250 results at 100 per page make 3 pages", () => {
	assert.equal(pageCount(250, 100), 3);
});

test("exact multiples and empty results", () => {
	assert.equal(pageCount(200, 100), 2);
	assert.equal(pageCount(1, 100), 1);
	assert.equal(pageCount(0, 100), 0);
});

test("clamp keeps the cursor inside the result set", () => {
	assert.equal(clampPage(5, 250, 100), 2);
	assert.equal(clampPage(-3, 250, 100), 0);
	assert.equal(clampPage(7, 0, 100), 0);
});

test("page slice returns the cursor's rows", () => {
	const rows = Array.from({ length: 250 }, (_, i) => i);
	assert.equal(pageSlice(rows, 0, 100).length, 100);
	assert.equal(pageSlice(rows, 2, 100).length, 50);
	assert.equal(pageSlice(rows, 2, 100)[0], 200);
});

test("page label is human readable", () => {
	assert.equal(pageLabel(1, 250, 100), "page 2 of 3 (250 rows)");
	assert.equal(pageLabel(0, 0, 100), "no results");
});
