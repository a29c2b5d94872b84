// Pure tree-view logic: flattening with expansion state, node lookup, and
// the label/count rendering the fidelity snapshot checks against the API.
export function nodePath(parentPath, label) {
    return parentPath ? `${parentPath}/${label}` : label;
}
/** Rows currently visible given the set of expanded node paths. */
export function flattenTree(root, expanded) {
    const rows = [];
    const walk = (node, parentPath, depth) => {
        const path = nodePath(parentPath, node.label);
        const isOpen = depth === 0 || expanded.has(path);
        rows.push({
            path,
            label: node.label,
            hitCount: node.hit_count,
            depth,
            hasChildren: node.children.length > 0,
            expanded: isOpen,
        });
        if (isOpen) {
            for (const child of node.children)
                walk(child, path, depth + 1);
        }
    };
    walk(root, "", 0);
    return rows;
}
export function findNode(root, path) {
    const segments = path.split("/");
    if (segments[0] !== root.label)
        return null;
    let node = root;
    for (const segment of segments.slice(1)) {
        const next = node.children.find((c) => c.label === segment);
        if (!next)
            return null;
        node = next;
    }
    return node;
}
export function allPaths(root) {
    const out = [];
    const walk = (node, parentPath) => {
        const path = nodePath(parentPath, node.label);
        out.push(path);
        for (const child of node.children)
            walk(child, path);
    };
    walk(root, "");
    return out;
}
/**
 * Exactly what the tree panel displays per node: the API's label and
 * hit_count, nothing recomputed. One line per node, indented by depth.
 */
export function treeLines(root) {
    const lines = [];
    const walk = (node, depth) => {
        lines.push(`${"  ".repeat(depth)}${node.label} [${node.hit_count}]`);
        for (const child of node.children)
            walk(child, depth + 1);
    };
    walk(root, 0);
    return lines;
}
export function countNodes(root) {
    return 1 + root.children.reduce((n, c) => n + countNodes(c), 0);
}
