import { parseArgs } from "node:util";
import { loadCorpus, loadGraphs } from "./corpus.js";
import { assembleNodeInput } from "./inputs.js";
import { DEFAULT_CONFIG, NodeEncoder } from "./encoder.js";
import { EmbeddingRow, writeExchangeFile } from "./writer.js";

export interface ExportJob {
  corpus: string;
  graphs: string;
  out: string;
  model: string;
  dim: number;
  layers: number;
  task: string;
  maxTokens: number;
}

export function exportEmbeddings(job: ExportJob): number {
  const docs = new Map(loadCorpus(job.corpus).map((d) => [d.docId, d]));
  const graphs = loadGraphs(job.graphs);
  const encoder = new NodeEncoder({
    model: job.model,
    dim: job.dim,
    layers: job.layers,
  });
  const rows: EmbeddingRow[] = [];
  for (const graph of graphs) {
    const doc = docs.get(graph.docId);
    if (!doc) throw new Error(`graph ${graph.docId} has no corpus document`);
    for (const node of graph.nodes) {
      const input = assembleNodeInput(doc, node, job.task, job.maxTokens);
      rows.push({
        docId: graph.docId,
        nodeId: node.id,
        vector: encoder.encode(input),
      });
    }
  }
  writeExchangeFile(rows, job.out);
  return rows.length;
}

export function main(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      corpus: { type: "string" },
      graphs: { type: "string" },
      out: { type: "string" },
      model: { type: "string", default: DEFAULT_CONFIG.model },
      dim: { type: "string", default: String(DEFAULT_CONFIG.dim) },
      layers: { type: "string", default: String(DEFAULT_CONFIG.layers) },
      task: { type: "string", default: "none" },
      "max-tokens": { type: "string", default: "160" },
    },
  });
  for (const flag of ["corpus", "graphs", "out"] as const) {
    if (!values[flag]) {
      console.error(`missing required --${flag}`);
      return 1;
    }
  }
  try {
    const count = exportEmbeddings({
      corpus: values.corpus!,
      graphs: values.graphs!,
      out: values.out!,
      model: values.model!,
      dim: Number(values.dim),
      layers: Number(values.layers),
      task: values.task!,
      maxTokens: Number(values["max-tokens"]),
    });
    console.log(`wrote ${count} embeddings to ${values.out}`);
    return 0;
  } catch (err) {
    console.error(String(err));
    return 2;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
