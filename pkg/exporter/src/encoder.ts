import { NodeInput } from "./inputs.js";

// Deterministic random-feature transformer encoder. Weights derive from the
// model identifier, token embeddings from token hashes, so identical inputs
// always produce identical vectors with no model files to download. The node
// input follows the two-segment convention: the node's sentence first, then
// context + label sentence.

export interface EncoderConfig {
  model: string;
  dim: number;
  layers: number;
  heads: number;
}

export const DEFAULT_CONFIG: EncoderConfig = {
  model: "mini-v1",
  dim: 64,
  layers: 2,
  heads: 4,
};

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianVector(rand: () => number, n: number, scale: number): Float64Array {
  const out = new Float64Array(n);
  for (let i = 0; i < n; i += 2) {
    const u = Math.max(rand(), 1e-12);
    const v = rand();
    const r = Math.sqrt(-2 * Math.log(u));
    out[i] = r * Math.cos(2 * Math.PI * v) * scale;
    if (i + 1 < n) out[i + 1] = r * Math.sin(2 * Math.PI * v) * scale;
  }
  return out;
}

/** rows x cols matrix in row-major order. */
function randomMatrix(rand: () => number, rows: number, cols: number): Float64Array {
  return gaussianVector(rand, rows * cols, 1 / Math.sqrt(cols));
}

function matVec(m: Float64Array, rows: number, cols: number, x: Float64Array): Float64Array {
  const out = new Float64Array(rows);
  for (let r = 0; r < rows; r++) {
    let acc = 0;
    const base = r * cols;
    for (let c = 0; c < cols; c++) acc += m[base + c] * x[c];
    out[r] = acc;
  }
  return out;
}

function layerNorm(x: Float64Array): Float64Array {
  let mean = 0;
  for (const v of x) mean += v;
  mean /= x.length;
  let variance = 0;
  for (const v of x) variance += (v - mean) ** 2;
  variance /= x.length;
  const inv = 1 / Math.sqrt(variance + 1e-6);
  const out = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) out[i] = (x[i] - mean) * inv;
  return out;
}

interface LayerWeights {
  wq: Float64Array;
  wk: Float64Array;
  wv: Float64Array;
  wo: Float64Array;
  ff1: Float64Array;
  ff2: Float64Array;
}

export class NodeEncoder {
  readonly config: EncoderConfig;
  private readonly layers: LayerWeights[];
  private readonly segments: [Float64Array, Float64Array];
  private readonly bos: Float64Array;
  private readonly sep: Float64Array;
  private readonly tokenCache = new Map<string, Float64Array>();

  constructor(config: Partial<EncoderConfig> = {}) {
    this.config = { ...DEFAULT_CONFIG, ...config };
    const { dim, layers, model } = this.config;
    const rand = mulberry32(fnv1a(`weights:${model}:${dim}:${layers}`));
    this.layers = [];
    for (let l = 0; l < layers; l++) {
      this.layers.push({
        wq: randomMatrix(rand, dim, dim),
        wk: randomMatrix(rand, dim, dim),
        wv: randomMatrix(rand, dim, dim),
        wo: randomMatrix(rand, dim, dim),
        ff1: randomMatrix(rand, 2 * dim, dim),
        ff2: randomMatrix(rand, dim, 2 * dim),
      });
    }
    this.segments = [
      gaussianVector(rand, dim, 0.1),
      gaussianVector(rand, dim, 0.1),
    ];
    this.bos = gaussianVector(rand, dim, 1 / Math.sqrt(dim));
    this.sep = gaussianVector(rand, dim, 1 / Math.sqrt(dim));
  }

  private tokenEmbedding(token: string): Float64Array {
    let cached = this.tokenCache.get(token);
    if (!cached) {
      const rand = mulberry32(fnv1a(`token:${this.config.model}:${token}`));
      cached = gaussianVector(rand, this.config.dim, 1 / Math.sqrt(this.config.dim));
      this.tokenCache.set(token, cached);
    }
    return cached;
  }

  private positional(pos: number): Float64Array {
    const { dim } = this.config;
    const out = new Float64Array(dim);
    for (let i = 0; i < dim; i += 2) {
      const angle = pos / Math.pow(10000, i / dim);
      out[i] = Math.sin(angle);
      if (i + 1 < dim) out[i + 1] = Math.cos(angle);
    }
    return out;
  }

  /** Pooled first-position representation of the two-segment node input. */
  encode(input: NodeInput): Float64Array {
    const { dim, heads } = this.config;
    const states: Float64Array[] = [];
    const push = (vec: Float64Array, segment: 0 | 1) => {
      const pos = this.positional(states.length);
      const seg = this.segments[segment];
      const x = new Float64Array(dim);
      for (let i = 0; i < dim; i++) x[i] = vec[i] + pos[i] + seg[i];
      states.push(layerNorm(x));
    };
    push(this.bos, 0);
    for (const tok of input.sentence) push(this.tokenEmbedding(tok), 0);
    push(this.sep, 0);
    for (const tok of input.context) push(this.tokenEmbedding(tok), 1);
    for (const tok of input.labelSentence) push(this.tokenEmbedding(tok), 1);
    push(this.sep, 1);

    let h = states;
    for (const layer of this.layers) {
      h = this.attentionBlock(h, layer, heads);
    }
    return h[0];
  }

  private attentionBlock(h: Float64Array[], w: LayerWeights, heads: number): Float64Array[] {
    const { dim } = this.config;
    const headDim = Math.floor(dim / heads);
    const t = h.length;
    const qs = h.map((x) => matVec(w.wq, dim, dim, x));
    const ks = h.map((x) => matVec(w.wk, dim, dim, x));
    const vs = h.map((x) => matVec(w.wv, dim, dim, x));
    const mixed: Float64Array[] = [];
    for (let i = 0; i < t; i++) {
      const out = new Float64Array(dim);
      for (let head = 0; head < heads; head++) {
        const lo = head * headDim;
        const hi = lo + headDim;
        const scores = new Float64Array(t);
        let maxScore = -Infinity;
        for (let j = 0; j < t; j++) {
          let s = 0;
          for (let k = lo; k < hi; k++) s += qs[i][k] * ks[j][k];
          s /= Math.sqrt(headDim);
          scores[j] = s;
          if (s > maxScore) maxScore = s;
        }
        let z = 0;
        for (let j = 0; j < t; j++) {
          scores[j] = Math.exp(scores[j] - maxScore);
          z += scores[j];
        }
        for (let j = 0; j < t; j++) {
          const a = scores[j] / z;
          for (let k = lo; k < hi; k++) out[k] += a * vs[j][k];
        }
      }
      mixed.push(matVec(w.wo, dim, dim, out));
    }
    const next: Float64Array[] = [];
    for (let i = 0; i < t; i++) {
      const res = new Float64Array(dim);
      for (let k = 0; k < dim; k++) res[k] = h[i][k] + mixed[i][k];
      const normed = layerNorm(res);
      const inner = matVec(w.ff1, 2 * dim, dim, normed);
      for (let k = 0; k < inner.length; k++) inner[k] = Math.max(0, inner[k]);
      const ff = matVec(w.ff2, dim, 2 * dim, inner);
      const out = new Float64Array(dim);
      for (let k = 0; k < dim; k++) out[k] = normed[k] + ff[k];
      next.push(layerNorm(out));
    }
    return next;
  }
}
