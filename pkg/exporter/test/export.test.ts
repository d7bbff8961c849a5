import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, describe, expect, it } from "vitest";
import { exportEmbeddings } from "../src/cli.js";
import { writeExchangeFile } from "../src/writer.js";

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "exporter-test-"));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

const FIXTURE_DIR = path.join(__dirname, "fixtures");

describe("writeExchangeFile", () => {
  it("writes the header and f32 round-trip values", () => {
    const out = path.join(tmp, "emb.tsv");
    writeExchangeFile(
      [{ docId: "d", nodeId: 0, vector: new Float64Array([0.5, -1.25, 3.0]) }],
      out,
    );
    const lines = fs.readFileSync(out, "utf-8").trim().split("\n");
    expect(lines[0]).toBe("#dim 3");
    const [docId, nodeId, vec] = lines[1].split("\t");
    expect(docId).toBe("d");
    expect(nodeId).toBe("0");
    const parsed = vec.split(" ").map(Number);
    expect(parsed.map(Math.fround)).toEqual([0.5, -1.25, 3.0]);
  });

  it("rejects ragged dimensions", () => {
    expect(() =>
      writeExchangeFile(
        [
          { docId: "d", nodeId: 0, vector: new Float64Array(2) },
          { docId: "d", nodeId: 1, vector: new Float64Array(3) },
        ],
        path.join(tmp, "ragged.tsv"),
      ),
    ).toThrow(/ragged/);
  });
});

describe("exportEmbeddings", () => {
  it("covers every graph node exactly once on the committed fixture", () => {
    const out = path.join(tmp, "fixture.tsv");
    const count = exportEmbeddings({
      corpus: path.join(FIXTURE_DIR, "corpus.jsonl"),
      graphs: path.join(FIXTURE_DIR, "graphs.jsonl"),
      out,
      model: "mini-v1",
      dim: 32,
      layers: 2,
      task: "plutchik",
      maxTokens: 160,
    });
    const lines = fs.readFileSync(out, "utf-8").trim().split("\n");
    expect(lines[0]).toBe("#dim 32");
    expect(lines.length).toBe(count + 1);
    const keys = new Set(
      lines.slice(1).map((l) => l.split("\t").slice(0, 2).join(":")),
    );
    expect(keys.size).toBe(count);
    const graphs = fs
      .readFileSync(path.join(FIXTURE_DIR, "graphs.jsonl"), "utf-8")
      .trim()
      .split("\n")
      .map((l) => JSON.parse(l));
    const expected = graphs.reduce((acc, g) => acc + g.nodes.length, 0);
    expect(count).toBe(expected);
  });

  it("is bitwise stable across runs", () => {
    const a = path.join(tmp, "a.tsv");
    const b = path.join(tmp, "b.tsv");
    const job = {
      corpus: path.join(FIXTURE_DIR, "corpus.jsonl"),
      graphs: path.join(FIXTURE_DIR, "graphs.jsonl"),
      out: a,
      model: "mini-v1",
      dim: 32,
      layers: 2,
      task: "none",
      maxTokens: 160,
    };
    exportEmbeddings(job);
    exportEmbeddings({ ...job, out: b });
    expect(fs.readFileSync(a, "utf-8")).toBe(fs.readFileSync(b, "utf-8"));
  });
});
