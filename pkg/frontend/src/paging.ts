// Result-table paging; pure so the page math is testable.

export const PAGE_SIZE = 100;

export function pageCount(total: number, perPage: number = PAGE_SIZE): number {
	return total <= 0 ? 0 : Math.ceil(total / perPage);
}

export function clampPage(page: number, total: number, perPage: number = PAGE_SIZE): number {
	const pages = pageCount(total, perPage);
	if (pages === 0) return 0;
	return Math.min(Math.max(page, 0), pages - 1);
}

export function pageSlice<T>(rows: T[], page: number, perPage: number = PAGE_SIZE): T[] {
	const p = clampPage(page, rows.length, perPage);
	return rows.slice(p * perPage, (p + 1) * perPage);
}

export function pageLabel(page: number, total: number, perPage: number = PAGE_SIZE): string {
	const pages = pageCount(total, perPage);
	return pages === 0 ? "no results" : `page ${page + 1} of ${pages} (${total} rows)`;
}
