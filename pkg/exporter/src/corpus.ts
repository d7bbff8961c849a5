import * as fs from "node:fs";

export interface Sentence {
  index: number;
  text: string;
  tokens: string[];
}

export interface CorefChain {
  entity: string;
  mentions: [number, number, number][]; // [sentence, start, end)
}

export interface StoryDocument {
  docId: string;
  sentences: Sentence[];
  chains: CorefChain[];
}

export interface GraphNode {
  id: number;
  entity: string;
  sentence: number;
}

export interface StoryGraph {
  docId: string;
  nodes: GraphNode[];
}

function readJsonl(path: string): any[] {
  const rows: any[] = [];
  const lines = fs.readFileSync(path, "utf-8").split("\n");
  lines.forEach((line, i) => {
    if (!line.trim()) return;
    try {
      rows.push(JSON.parse(line));
    } catch (err) {
      throw new Error(`${path}:${i + 1}: invalid JSON`);
    }
  });
  return rows;
}

export function loadCorpus(path: string): StoryDocument[] {
  return readJsonl(path).map((raw) => ({
    docId: String(raw.doc_id),
    sentences: raw.sentences.map((s: any) => ({
      index: s.index,
      text: s.text,
      tokens: s.tokens as string[],
    })),
    chains: (raw.chains ?? []).map((c: any) => ({
      entity: c.entity,
      mentions: c.mentions as [number, number, number][],
    })),
  }));
}

export function loadGraphs(path: string): StoryGraph[] {
  return readJsonl(path).map((raw) => ({
    docId: String(raw.doc_id),
    nodes: raw.nodes.map((n: any) => ({
      id: n.id,
      entity: n.entity,
      sentence: n.sentence,
    })),
  }));
}
