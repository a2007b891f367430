// Org chart assembly from flat OrgUnit rows.

import { ObjectRow } from "./api.js";

export interface OrgNode {
  id: number;
  name: string;
  children: OrgNode[];
}

export function buildOrgTree(units: ObjectRow[]): OrgNode[] {
  const nodes = new Map<number, OrgNode>();
  for (const row of units) {
    nodes.set(row.id, {
      id: row.id,
      name: String(row.values["name"] ?? `unit ${row.id}`),
      children: [],
    });
  }
  const roots: OrgNode[] = [];
  for (const row of units) {
    const node = nodes.get(row.id)!;
    const parent = row.values["parent"];
    const parentNode = typeof parent === "number" ? nodes.get(parent) : undefined;
    if (parentNode) {
      parentNode.children.push(node);
    } else {
      roots.push(node);
    }
  }
  const byName = (a: OrgNode, b: OrgNode) => a.name.localeCompare(b.name);
  const sort = (list: OrgNode[]) => {
    list.sort(byName);
    list.forEach((n) => sort(n.children));
  };
  sort(roots);
  return roots;
}

export function flatten(roots: OrgNode[]): Array<{ node: OrgNode; depth: number }> {
  const out: Array<{ node: OrgNode; depth: number }> = [];
  const walk = (node: OrgNode, depth: number) => {
    out.push({ node, depth });
    node.children.forEach((c) => walk(c, depth + 1));
  };
  roots.forEach((r) => walk(r, 0));
  return out;
}
