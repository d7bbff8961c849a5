import * as fs from "node:fs";
import * as path from "node:path";

export interface EmbeddingRow {
  docId: string;
  nodeId: number;
  vector: Float64Array;
}

// 9 significant digits round-trip an f32 value exactly through decimal text.
function formatF32(x: number): string {
  return Math.fround(x).toPrecision(9);
}

export function formatRow(row: EmbeddingRow): string {
  const vec = Array.from(row.vector, formatF32).join(" ");
  return `${row.docId}\t${row.nodeId}\t${vec}`;
}

/** Exchange file: '#dim <d>' header then one row per node; written atomically. */
export function writeExchangeFile(rows: EmbeddingRow[], outPath: string): void {
  const dims = new Set(rows.map((r) => r.vector.length));
  if (dims.size > 1) {
    throw new Error(`ragged embedding dimensions: ${[...dims].join(", ")}`);
  }
  const dim = rows.length ? rows[0].vector.length : 0;
  const lines = [`#dim ${dim}`];
  for (const row of rows) lines.push(formatRow(row));
  const tmp = path.join(
    path.dirname(path.resolve(outPath)),
    `.${path.basename(outPath)}.tmp`,
  );
  fs.writeFileSync(tmp, lines.join("\n") + "\n", "utf-8");
  fs.renameSync(tmp, outPath);
}
