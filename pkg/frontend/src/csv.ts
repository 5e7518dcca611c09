/** Strict readers for the pairgen CSV artifacts.
 *
 * Every consumer validates before rendering: exact header match, numeric
 * columns finite, integer columns integral. Violations abort the figure.
 */

import { readFileSync } from "node:fs";

export type ColumnKind = "f" | "i" | "s";

export const SCHEMAS: Record<string, Array<[string, ColumnKind]>> = {
  dispersion: [
    ["kx", "f"], ["ky", "f"], ["eps", "f"], ["re_omega", "f"],
    ["im_omega", "f"], ["eps_tilde", "f"], ["re_xi", "f"], ["im_xi", "f"],
  ],
  nk_t: [
    ["t", "f"], ["kx", "f"], ["ky", "f"], ["layer", "s"],
    ["value", "f"], ["stderr", "f"],
  ],
  npair_t: [["t", "f"], ["value", "f"], ["stderr", "f"]],
  cpm_t: [
    ["t", "f"], ["dx", "i"], ["dy", "i"], ["layer", "s"],
    ["re", "f"], ["im", "f"],
  ],
  nk_avg: [["kx", "f"], ["ky", "f"], ["mean", "f"], ["stderr", "f"]],
  summary: [["param", "f"], ["gamma", "f"], ["k_star", "s"], ["topology", "s"]],
};

export class SchemaViolation extends Error {}

/** Minimal RFC-4180 row splitter (the k_star column carries quoted JSON). */
function splitRow(line: string): string[] {
  const out: string[] = [];
  let field = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const c = line[i];
    if (quoted) {
      if (c === '"') {
        if (line[i + 1] === '"') {
          field += '"';
          i++;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c === '"') {
      quoted = true;
    } else if (c === ",") {
      out.push(field);
      field = "";
    } else {
      field += c;
    }
  }
  out.push(field);
  return out;
}

export type Row = Record<string, number | string>;

export function readCsv(path: string, schemaId: keyof typeof SCHEMAS): Row[] {
  const columns = SCHEMAS[schemaId];
  if (!columns) throw new SchemaViolation(`unknown schema ${schemaId}`);
  const text = readFileSync(path, "utf-8");
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaViolation(`${path}: empty file, missing header`);
  const header = splitRow(lines[0]);
  const expected = columns.map(([name]) => name);
  if (header.length !== expected.length || header.some((h, i) => h !== expected[i])) {
    throw new SchemaViolation(
      `${path}: header [${header}] does not match schema ${schemaId} [${expected}]`,
    );
  }
  if (lines.length === 1) throw new SchemaViolation(`${path}: no data rows`);
  const rows: Row[] = [];
  for (let ln = 1; ln < lines.length; ln++) {
    const parts = splitRow(lines[ln]);
    if (parts.length !== columns.length) {
      throw new SchemaViolation(`${path}:${ln + 1}: expected ${columns.length} fields`);
    }
    const row: Row = {};
    for (let c = 0; c < columns.length; c++) {
      const [name, kind] = columns[c];
      if (kind === "s") {
        row[name] = parts[c];
        continue;
      }
      const v = Number(parts[c]);
      if (!Number.isFinite(v)) {
        throw new SchemaViolation(`${path}:${ln + 1}: column ${name} not finite: ${parts[c]}`);
      }
      if (kind === "i" && !Number.isInteger(v)) {
        throw new SchemaViolation(`${path}:${ln + 1}: column ${name} not an integer`);
      }
      row[name] = v;
    }
    rows.push(row);
  }
  return rows;
}

export interface InstabilityReport {
  gamma: number;
  k_star: Array<[number, number]>;
  topology: string;
  component_count: number;
}

export function readReport(path: string): InstabilityReport {
  const raw = JSON.parse(readFileSync(path, "utf-8"));
  for (const key of ["gamma", "k_star", "topology", "component_count"]) {
    if (!(key in raw)) throw new SchemaViolation(`${path}: report missing key ${key}`);
  }
  return raw as InstabilityReport;
}
