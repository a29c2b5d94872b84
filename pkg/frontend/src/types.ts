// Shapes mirroring the service's JSON API documents.

export interface Evidence {
	table: string;
	row_id: number;
	value: string;
	first_ts: number;
	last_ts: number;
}

export interface TreeNode {
	label: string;
	hit_count: number;
	distinct_count: number;
	evidence: Evidence[];
	evidence_truncated: boolean;
	children: TreeNode[];
}

export interface TreeDoc {
	tree: TreeNode;
	skipped_rules: { rule_id: string; reason: string }[];
}

export interface Rule {
	rule_id: string;
	selector: string;
	result_name: string;
	parent_path: string;
	pattern: string;
	mode: "partial" | "exact";
	enabled: boolean;
}

export interface RulesetDoc {
	format_version: number;
	rules: Rule[];
}

export interface SchemaDoc {
	tables: Record<string, string[]>;
}

export interface SearchResponse {
	selector: string;
	q: string;
	mode: string;
	total: number;
	rows: Record<string, unknown>[];
}

export interface PreviewResponse {
	hit_count: number;
	sample: Record<string, unknown>[];
	sample_distinct: number;
}

export interface Violation {
	code: string;
	message: string;
	rule_id?: string | null;
}

export interface RunDoc {
	name: string;
	created_ts: number;
	finalized: number;
	duration_s: number | null;
	throughput_bps: number | null;
	counters: Record<string, number>;
	capture_files: { path: string; byte_length: number; md5: string; sha1: string; packet_count: number }[];
	incomplete: boolean;
}
