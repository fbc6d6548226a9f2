/**
 * Layers and the optimizer. Every learnable tensor is registered in a
 * ParamStore so the optimizer, gradient checks, and checkpoints see one
 * flat named list.
 */

import { Rng } from "./rng.js";
import {
  Tensor,
  add,
  concatLast,
  gelu,
  layerNormLast,
  matmul,
  numel,
  scale,
  sliceLast,
  softmaxLast,
  zeros,
} from "./tensor.js";

export class ParamStore {
  params = new Map<string, Tensor>();

  register(name: string, t: Tensor): Tensor {
    if (this.params.has(name)) throw new Error(`duplicate parameter ${name}`);
    t.requiresGrad = true;
    this.params.set(name, t);
    return t;
  }

  get(name: string): Tensor {
    const t = this.params.get(name);
    if (!t) throw new Error(`unknown parameter ${name}`);
    return t;
  }

  zeroGrads(): void {
    for (const t of this.params.values()) t.grad = null;
  }

  count(): number {
    let n = 0;
    for (const t of this.params.values()) n += t.size;
    return n;
  }
}

export function xavier(store: ParamStore, name: string, rows: number, cols: number, rng: Rng): Tensor {
  const limit = Math.sqrt(6.0 / (rows + cols));
  const data = new Float64Array(rows * cols);
  for (let i = 0; i < data.length; i++) data[i] = rng.uniform(-limit, limit);
  return store.register(name, new Tensor(data, [rows, cols]));
}

export class Linear {
  w: Tensor;
  b: Tensor;

  constructor(store: ParamStore, name: string, inDim: number, outDim: number, rng: Rng) {
    this.w = xavier(store, `${name}.w`, inDim, outDim, rng);
    this.b = store.register(`${name}.b`, zeros([outDim]));
  }

  forward(x: Tensor): Tensor {
    return add(matmul(x, this.w), this.b);
  }
}

export class LayerNorm {
  gamma: Tensor;
  beta: Tensor;

  constructor(store: ParamStore, name: string, dim: number) {
    const ones = new Float64Array(dim).fill(1.0);
    this.gamma = store.register(`${name}.gamma`, new Tensor(ones, [dim]));
    this.beta = store.register(`${name}.beta`, zeros([dim]));
  }

  forward(x: Tensor): Tensor {
    return layerNormLast(x, this.gamma, this.beta);
  }
}

/**
 * Multi-head attention. Queries, keys, and values may come from
 * different sources (self-attention passes the same tensor three
 * times). Channel dimension is split evenly across heads.
 */
export class MultiHeadAttention {
  wq: Linear;
  wk: Linear;
  wv: Linear;
  wo: Linear;
  readonly heads: number;
  readonly dim: number;

  constructor(store: ParamStore, name: string, dim: number, heads: number, rng: Rng) {
    if (dim % heads !== 0) throw new Error("heads must divide the channel dim");
    this.heads = heads;
    this.dim = dim;
    this.wq = new Linear(store, `${name}.wq`, dim, dim, rng);
    this.wk = new Linear(store, `${name}.wk`, dim, dim, rng);
    this.wv = new Linear(store, `${name}.wv`, dim, dim, rng);
    this.wo = new Linear(store, `${name}.wo`, dim, dim, rng);
  }

  forward(query: Tensor, key: Tensor, value: Tensor): Tensor {
    const q = this.wq.forward(query);
    const k = this.wk.forward(key);
    const v = this.wv.forward(value);
    const dh = this.dim / this.heads;
    const parts: Tensor[] = [];
    for (let h = 0; h < this.heads; h++) {
      const qh = sliceLast(q, h * dh, (h + 1) * dh);
      const kh = sliceLast(k, h * dh, (h + 1) * dh);
      const vh = sliceLast(v, h * dh, (h + 1) * dh);
      const scores = scale(matmul(qh, kh, true), 1.0 / Math.sqrt(dh));
      const weights = softmaxLast(scores);
      parts.push(matmul(weights, vh));
    }
    return this.wo.forward(this.heads === 1 ? parts[0] : concatLast(parts));
  }
}

/** Transformer feed-forward: expand 4x, GELU, project back. */
export class FeedForward {
  fc1: Linear;
  fc2: Linear;

  constructor(store: ParamStore, name: string, dim: number, rng: Rng) {
    this.fc1 = new Linear(store, `${name}.fc1`, dim, 4 * dim, rng);
    this.fc2 = new Linear(store, `${name}.fc2`, 4 * dim, dim, rng);
  }

  forward(x: Tensor): Tensor {
    return this.fc2.forward(gelu(this.fc1.forward(x)));
  }
}

/** Three fully-connected layers with layernorm + GELU between them. */
export class PredictionHead {
  fc1: Linear;
  ln1: LayerNorm;
  fc2: Linear;
  ln2: LayerNorm;
  fc3: Linear;

  constructor(store: ParamStore, name: string, dim: number, outDim: number, rng: Rng) {
    this.fc1 = new Linear(store, `${name}.fc1`, dim, dim, rng);
    this.ln1 = new LayerNorm(store, `${name}.ln1`, dim);
    this.fc2 = new Linear(store, `${name}.fc2`, dim, dim, rng);
    this.ln2 = new LayerNorm(store, `${name}.ln2`, dim);
    this.fc3 = new Linear(store, `${name}.fc3`, dim, outDim, rng);
  }

  forward(x: Tensor): Tensor {
    const a = gelu(this.ln1.forward(this.fc1.forward(x)));
    const b = gelu(this.ln2.forward(this.fc2.forward(a)));
    return this.fc3.forward(b);
  }
}

/** Adam with decoupled weight decay. */
export class AdamW {
  lr: number;
  beta1: number;
  beta2: number;
  eps: number;
  weightDecay: number;
  private m = new Map<string, Float64Array>();
  private v = new Map<string, Float64Array>();
  private step_ = 0;

  constructor(opts: { lr?: number; beta1?: number; beta2?: number; eps?: number; weightDecay?: number } = {}) {
    this.lr = opts.lr ?? 1e-4;
    this.beta1 = opts.beta1 ?? 0.9;
    this.beta2 = opts.beta2 ?? 0.999;
    this.eps = opts.eps ?? 1e-8;
    this.weightDecay = opts.weightDecay ?? 0.01;
  }

  step(store: ParamStore): void {
    this.step_ += 1;
    const bc1 = 1.0 - Math.pow(this.beta1, this.step_);
    const bc2 = 1.0 - Math.pow(this.beta2, this.step_);
    for (const [name, p] of store.params) {
      const g = p.grad;
      if (!g) continue;
      let m = this.m.get(name);
      let v = this.v.get(name);
      if (!m) {
        m = new Float64Array(p.size);
        v = new Float64Array(p.size);
        this.m.set(name, m);
        this.v.set(name, v!);
      }
      for (let i = 0; i < p.size; i++) {
        p.data[i] -= this.lr * this.weightDecay * p.data[i];
        m[i] = this.beta1 * m[i] + (1.0 - this.beta1) * g[i];
        v![i] = this.beta2 * v![i] + (1.0 - this.beta2) * g[i] * g[i];
        const mhat = m[i] / bc1;
        const vhat = v![i] / bc2;
        p.data[i] -= (this.lr * mhat) / (Math.sqrt(vhat) + this.eps);
      }
    }
  }
}
