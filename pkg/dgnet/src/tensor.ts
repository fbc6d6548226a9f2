/**
 * Minimal reverse-mode autodiff over dense Float64 tensors.
 *
 * Shapes are row-major. Broadcasting is deliberately restricted to the
 * "suffix" case (the second operand's shape equals the trailing shape of
 * the first), which covers biases, positional tables, and per-feature
 * masks without a general broadcast engine.
 */

export class Tensor {
  data: Float64Array;
  shape: number[];
  grad: Float64Array | null = null;
  requiresGrad: boolean;
  parents: Tensor[] = [];
  backwardFn: (() => void) | null = null;

  constructor(data: Float64Array, shape: number[], requiresGrad = false) {
    if (data.length !== numel(shape)) {
      throw new Error(`data length ${data.length} does not match shape ${shape}`);
    }
    this.data = data;
    this.shape = shape.slice();
    this.requiresGrad = requiresGrad;
  }

  get size(): number {
    return this.data.length;
  }

  ensureGrad(): Float64Array {
    if (!this.grad) this.grad = new Float64Array(this.size);
    return this.grad;
  }

  item(): number {
    if (this.size !== 1) throw new Error(`item() on tensor of size ${this.size}`);
    return this.data[0];
  }
}

export function numel(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function tensor(values: number[] | Float64Array, shape?: number[]): Tensor {
  const data = values instanceof Float64Array ? values : Float64Array.from(values);
  return new Tensor(data, shape ?? [data.length]);
}

export function zeros(shape: number[], requiresGrad = false): Tensor {
  return new Tensor(new Float64Array(numel(shape)), shape, requiresGrad);
}

function out(
  data: Float64Array,
  shape: number[],
  parents: Tensor[],
  backwardFn: (o: Tensor) => () => void
): Tensor {
  const o = new Tensor(data, shape, parents.some((p) => p.requiresGrad));
  if (o.requiresGrad) {
    o.parents = parents;
    o.backwardFn = backwardFn(o);
  }
  return o;
}

function checkSuffix(a: Tensor, b: Tensor): void {
  const trail = a.shape.slice(a.shape.length - b.shape.length);
  if (
    b.shape.length > a.shape.length ||
    trail.some((d, i) => d !== b.shape[i])
  ) {
    throw new Error(`cannot suffix-broadcast ${b.shape} onto ${a.shape}`);
  }
}

/** a + b, with b suffix-broadcast over a's leading dimensions. */
export function add(a: Tensor, b: Tensor): Tensor {
  checkSuffix(a, b);
  const n = a.size;
  const m = b.size;
  const data = new Float64Array(n);
  for (let i = 0; i < n; i++) data[i] = a.data[i] + b.data[i % m];
  return out(data, a.shape, [a, b], (o) => () => {
    const g = o.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < n; i++) ga[i] += g[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < n; i++) gb[i % m] += g[i];
    }
  });
}

export function sub(a: Tensor, b: Tensor): Tensor {
  return add(a, scale(b, -1));
}

/** a * b elementwise, with b suffix-broadcast. */
export function mul(a: Tensor, b: Tensor): Tensor {
  checkSuffix(a, b);
  const n = a.size;
  const m = b.size;
  const data = new Float64Array(n);
  for (let i = 0; i < n; i++) data[i] = a.data[i] * b.data[i % m];
  return out(data, a.shape, [a, b], (o) => () => {
    const g = o.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < n; i++) ga[i] += g[i] * b.data[i % m];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < n; i++) gb[i % m] += g[i] * a.data[i];
    }
  });
}

export function scale(a: Tensor, s: number): Tensor {
  const data = new Float64Array(a.size);
  for (let i = 0; i < a.size; i++) data[i] = a.data[i] * s;
  return out(data, a.shape, [a], (o) => () => {
    if (!a.requiresGrad) return;
    const g = o.grad!;
    const ga = a.ensureGrad();
    for (let i = 0; i < a.size; i++) ga[i] += g[i] * s;
  });
}

/**
 * Batched matrix product. `a` is (..., M, K); `b` is either a shared 2-D
 * matrix or batched with the same leading dimensions as `a`. With
 * `transposeB` the contraction runs over b's last dimension.
 */
export function matmul(a: Tensor, b: Tensor, transposeB = false): Tensor {
  const ar = a.shape.length;
  if (ar < 2) throw new Error("matmul lhs needs >= 2 dims");
  const M = a.shape[ar - 2];
  const K = a.shape[ar - 1];
  const batch = a.size / (M * K);
  const shared = b.shape.length === 2;
  if (!shared && numel(b.shape.slice(0, b.shape.length - 2)) !== batch) {
    throw new Error(`matmul batch mismatch: ${a.shape} vs ${b.shape}`);
  }
  const bK = b.shape[b.shape.length - (transposeB ? 1 : 2)];
  const N = b.shape[b.shape.length - (transposeB ? 2 : 1)];
  if (bK !== K) throw new Error(`matmul inner mismatch: ${a.shape} vs ${b.shape}`);
  const outShape = a.shape.slice(0, ar - 2).concat([M, N]);
  const data = new Float64Array(batch * M * N);
  const bStride = shared ? 0 : K * N;

  for (let bi = 0; bi < batch; bi++) {
    const ao = bi * M * K;
    const bo = bi * bStride;
    const oo = bi * M * N;
    for (let m = 0; m < M; m++) {
      if (!transposeB) {
        for (let k = 0; k < K; k++) {
          const av = a.data[ao + m * K + k];
          if (av === 0) continue;
          const brow = bo + k * N;
          const orow = oo + m * N;
          for (let n = 0; n < N; n++) data[orow + n] += av * b.data[brow + n];
        }
      } else {
        const arow = ao + m * K;
        const orow = oo + m * N;
        for (let n = 0; n < N; n++) {
          const brow = bo + n * K;
          let acc = 0;
          for (let k = 0; k < K; k++) acc += a.data[arow + k] * b.data[brow + k];
          data[orow + n] = acc;
        }
      }
    }
  }

  return out(data, outShape, [a, b], (o) => () => {
    const g = o.grad!;
    for (let bi = 0; bi < batch; bi++) {
      const ao = bi * M * K;
      const bo = bi * bStride;
      const oo = bi * M * N;
      if (a.requiresGrad) {
        const ga = a.ensureGrad();
        for (let m = 0; m < M; m++) {
          for (let n = 0; n < N; n++) {
            const gv = g[oo + m * N + n];
            if (gv === 0) continue;
            if (!transposeB) {
              const brow = bo + n; // b[k*N + n]
              for (let k = 0; k < K; k++) ga[ao + m * K + k] += gv * b.data[bo + k * N + n];
            } else {
              const brow = bo + n * K;
              for (let k = 0; k < K; k++) ga[ao + m * K + k] += gv * b.data[brow + k];
            }
          }
        }
      }
      if (b.requiresGrad) {
        const gb = b.ensureGrad();
        for (let m = 0; m < M; m++) {
          for (let k = 0; k < K; k++) {
            const av = a.data[ao + m * K + k];
            if (av === 0) continue;
            for (let n = 0; n < N; n++) {
              const gv = g[oo + m * N + n];
              if (!transposeB) gb[bo + k * N + n] += av * gv;
              else gb[bo + n * K + k] += av * gv;
            }
          }
        }
      }
    }
  });
}

/** Softmax over the last dimension. */
export function softmaxLast(x: Tensor): Tensor {
  const C = x.shape[x.shape.length - 1];
  const rows = x.size / C;
  const data = new Float64Array(x.size);
  for (let r = 0; r < rows; r++) {
    const off = r * C;
    let mx = -Infinity;
    for (let c = 0; c < C; c++) mx = Math.max(mx, x.data[off + c]);
    let sum = 0;
    for (let c = 0; c < C; c++) {
      const e = Math.exp(x.data[off + c] - mx);
      data[off + c] = e;
      sum += e;
    }
    for (let c = 0; c < C; c++) data[off + c] /= sum;
  }
  return out(data, x.shape, [x], (o) => () => {
    if (!x.requiresGrad) return;
    const g = o.grad!;
    const gx = x.ensureGrad();
    for (let r = 0; r < rows; r++) {
      const off = r * C;
      let dot = 0;
      for (let c = 0; c < C; c++) dot += g[off + c] * o.data[off + c];
      for (let c = 0; c < C; c++) {
        gx[off + c] += o.data[off + c] * (g[off + c] - dot);
      }
    }
  });
}

const LN_EPS = 1e-5;

/** Layer normalization over the last dimension with learnable gain/shift. */
export function layerNormLast(x: Tensor, gamma: Tensor, beta: Tensor): Tensor {
  const C = x.shape[x.shape.length - 1];
  if (gamma.size !== C || beta.size !== C) {
    throw new Error("layernorm gain/shift must match the channel dimension");
  }
  const rows = x.size / C;
  const data = new Float64Array(x.size);
  const xhat = new Float64Array(x.size);
  const invstd = new Float64Array(rows);
  for (let r = 0; r < rows; r++) {
    const off = r * C;
    let mean = 0;
    for (let c = 0; c < C; c++) mean += x.data[off + c];
    mean /= C;
    let variance = 0;
    for (let c = 0; c < C; c++) {
      const d = x.data[off + c] - mean;
      variance += d * d;
    }
    variance /= C;
    const inv = 1.0 / Math.sqrt(variance + LN_EPS);
    invstd[r] = inv;
    for (let c = 0; c < C; c++) {
      const h = (x.data[off + c] - mean) * inv;
      xhat[off + c] = h;
      data[off + c] = h * gamma.data[c] + beta.data[c];
    }
  }
  return out(data, x.shape, [x, gamma, beta], (o) => () => {
    const g = o.grad!;
    const gGamma = gamma.requiresGrad ? gamma.ensureGrad() : null;
    const gBeta = beta.requiresGrad ? beta.ensureGrad() : null;
    const gx = x.requiresGrad ? x.ensureGrad() : null;
    for (let r = 0; r < rows; r++) {
      const off = r * C;
      let meanGh = 0;
      let meanGhH = 0;
      for (let c = 0; c < C; c++) {
        const gh = g[off + c] * gamma.data[c];
        meanGh += gh;
        meanGhH += gh * xhat[off + c];
        if (gGamma) gGamma[c] += g[off + c] * xhat[off + c];
        if (gBeta) gBeta[c] += g[off + c];
      }
      meanGh /= C;
      meanGhH /= C;
      if (gx) {
        for (let c = 0; c < C; c++) {
          const gh = g[off + c] * gamma.data[c];
          gx[off + c] += invstd[r] * (gh - meanGh - xhat[off + c] * meanGhH);
        }
      }
    }
  });
}

const GELU_C = Math.sqrt(2.0 / Math.PI);
const GELU_A = 0.044715;

/** Smooth GELU (tanh form). */
export function gelu(x: Tensor): Tensor {
  const data = new Float64Array(x.size);
  for (let i = 0; i < x.size; i++) {
    const v = x.data[i];
    data[i] = 0.5 * v * (1.0 + Math.tanh(GELU_C * (v + GELU_A * v * v * v)));
  }
  return out(data, x.shape, [x], (o) => () => {
    if (!x.requiresGrad) return;
    const g = o.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < x.size; i++) {
      const v = x.data[i];
      const u = GELU_C * (v + GELU_A * v * v * v);
      const t = Math.tanh(u);
      const sech2 = 1.0 - t * t;
      const du = GELU_C * (1.0 + 3.0 * GELU_A * v * v);
      gx[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * sech2 * du);
    }
  });
}

export function sigmoid(x: Tensor): Tensor {
  const data = new Float64Array(x.size);
  for (let i = 0; i < x.size; i++) data[i] = 1.0 / (1.0 + Math.exp(-x.data[i]));
  return out(data, x.shape, [x], (o) => () => {
    if (!x.requiresGrad) return;
    const g = o.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < x.size; i++) {
      gx[i] += g[i] * o.data[i] * (1.0 - o.data[i]);
    }
  });
}

/** Mean over the middle axis of a 3-D tensor: (A, D, C) -> (A, C). */
export function meanMid(x: Tensor): Tensor {
  if (x.shape.length !== 3) throw new Error("meanMid expects a 3-D tensor");
  const [A, D, C] = x.shape;
  const data = new Float64Array(A * C);
  for (let a = 0; a < A; a++) {
    for (let d = 0; d < D; d++) {
      const off = (a * D + d) * C;
      for (let c = 0; c < C; c++) data[a * C + c] += x.data[off + c];
    }
  }
  for (let i = 0; i < data.length; i++) data[i] /= D;
  return out(data, [A, C], [x], (o) => () => {
    if (!x.requiresGrad) return;
    const g = o.grad!;
    const gx = x.ensureGrad();
    for (let a = 0; a < A; a++) {
      for (let d = 0; d < D; d++) {
        const off = (a * D + d) * C;
        for (let c = 0; c < C; c++) gx[off + c] += g[a * C + c] / D;
      }
    }
  });
}

export function reshape(x: Tensor, shape: number[]): Tensor {
  if (numel(shape) !== x.size) {
    throw new Error(`cannot reshape ${x.shape} to ${shape}`);
  }
  return out(x.data.slice(), shape, [x], (o) => () => {
    if (!x.requiresGrad) return;
    const g = o.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < x.size; i++) gx[i] += g[i];
  });
}

/** Select rows of a 2-D tensor: (K, R) with indices -> (n, R). */
export function gatherRows(x: Tensor, indices: number[]): Tensor {
  if (x.shape.length !== 2) throw new Error("gatherRows expects a 2-D tensor");
  const [K, R] = x.shape;
  const n = indices.length;
  const data = new Float64Array(n * R);
  for (let i = 0; i < n; i++) {
    const idx = indices[i];
    if (idx < 0 || idx >= K) throw new Error(`row ${idx} out of range 0..${K - 1}`);
    data.set(x.data.subarray(idx * R, (idx + 1) * R), i * R);
  }
  return out(data, [n, R], [x], (o) => () => {
    if (!x.requiresGrad) return;
    const g = o.grad!;
    const gx = x.ensureGrad();
    for (let i = 0; i < n; i++) {
      const off = indices[i] * R;
      for (let r = 0; r < R; r++) gx[off + r] += g[i * R + r];
    }
  });
}

/** Repeat each batch entry `times` times: (B, ...) -> (B*times, ...). */
export function tileBatch(x: Tensor, times: number): Tensor {
  const B = x.shape[0];
  const rest = x.size / B;
  const data = new Float64Array(x.size * times);
  for (let b = 0; b < B; b++) {
    const src = x.data.subarray(b * rest, (b + 1) * rest);
    for (let t = 0; t < times; t++) data.set(src, (b * times + t) * rest);
  }
  return out(data, [B * times, ...x.shape.slice(1)], [x], (o) => () => {
    if (!x.requiresGrad) return;
    const g = o.grad!;
    const gx = x.ensureGrad();
    for (let b = 0; b < B; b++) {
      for (let t = 0; t < times; t++) {
        const off = (b * times + t) * rest;
        for (let r = 0; r < rest; r++) gx[b * rest + r] += g[off + r];
      }
    }
  });
}

/** (N, C) -> (N, D, C), repeating each row D times along a new middle axis. */
export function expandMid(x: Tensor, D: number): Tensor {
  if (x.shape.length !== 2) throw new Error("expandMid expects a 2-D tensor");
  const [N, C] = x.shape;
  const data = new Float64Array(N * D * C);
  for (let n = 0; n < N; n++) {
    const src = x.data.subarray(n * C, (n + 1) * C);
    for (let d = 0; d < D; d++) data.set(src, (n * D + d) * C);
  }
  return out(data, [N, D, C], [x], (o) => () => {
    if (!x.requiresGrad) return;
    const g = o.grad!;
    const gx = x.ensureGrad();
    for (let n = 0; n < N; n++) {
      for (let d = 0; d < D; d++) {
        const off = (n * D + d) * C;
        for (let c = 0; c < C; c++) gx[n * C + c] += g[off + c];
      }
    }
  });
}

/** Slice the last dimension to [start, end). */
export function sliceLast(x: Tensor, start: number, end: number): Tensor {
  const C = x.shape[x.shape.length - 1];
  const W = end - start;
  const rows = x.size / C;
  const data = new Float64Array(rows * W);
  for (let r = 0; r < rows; r++) {
    data.set(x.data.subarray(r * C + start, r * C + end), r * W);
  }
  const shape = x.shape.slice(0, -1).concat([W]);
  return out(data, shape, [x], (o) => () => {
    if (!x.requiresGrad) return;
    const g = o.grad!;
    const gx = x.ensureGrad();
    for (let r = 0; r < rows; r++) {
      for (let c = 0; c < W; c++) gx[r * C + start + c] += g[r * W + c];
    }
  });
}

/** Concatenate along the last dimension. */
export function concatLast(xs: Tensor[]): Tensor {
  const lead = xs[0].shape.slice(0, -1);
  const widths = xs.map((t) => t.shape[t.shape.length - 1]);
  for (const t of xs) {
    if (t.shape.slice(0, -1).join() !== lead.join()) {
      throw new Error("concatLast leading dims must match");
    }
  }
  const W = widths.reduce((a, b) => a + b, 0);
  const rows = numel(lead);
  const data = new Float64Array(rows * W);
  for (let r = 0; r < rows; r++) {
    let offset = 0;
    for (let i = 0; i < xs.length; i++) {
      const w = widths[i];
      data.set(xs[i].data.subarray(r * w, (r + 1) * w), r * W + offset);
      offset += w;
    }
  }
  return out(data, lead.concat([W]), xs, (o) => () => {
    const g = o.grad!;
    for (let r = 0; r < rows; r++) {
      let offset = 0;
      for (let i = 0; i < xs.length; i++) {
        const w = widths[i];
        if (xs[i].requiresGrad) {
          const gx = xs[i].ensureGrad();
          for (let c = 0; c < w; c++) gx[r * w + c] += g[r * W + offset + c];
        }
        offset += w;
      }
    }
  });
}

/** Concatenate 2-D tensors along the first dimension. */
export function concatRows(xs: Tensor[]): Tensor {
  const C = xs[0].shape[1];
  for (const t of xs) {
    if (t.shape.length !== 2 || t.shape[1] !== C) {
      throw new Error("concatRows expects 2-D tensors with equal widths");
    }
  }
  const rows = xs.map((t) => t.shape[0]);
  const total = rows.reduce((a, b) => a + b, 0);
  const data = new Float64Array(total * C);
  let offset = 0;
  for (const t of xs) {
    data.set(t.data, offset);
    offset += t.size;
  }
  return out(data, [total, C], xs, (o) => () => {
    const g = o.grad!;
    let off = 0;
    for (const t of xs) {
      if (t.requiresGrad) {
        const gx = t.ensureGrad();
        for (let i = 0; i < t.size; i++) gx[i] += g[off + i];
      }
      off += t.size;
    }
  });
}

/** Mean categorical cross-entropy from raw logits (N, C). */
export function crossEntropy(logits: Tensor, labels: Int32Array | number[]): Tensor {
  const C = logits.shape[logits.shape.length - 1];
  const N = logits.size / C;
  if (labels.length !== N) throw new Error("one label per logit row required");
  const probs = new Float64Array(logits.size);
  let total = 0;
  for (let r = 0; r < N; r++) {
    const off = r * C;
    const y = labels[r];
    if (y < 0 || y >= C) throw new Error(`label ${y} out of range 0..${C - 1}`);
    let mx = -Infinity;
    for (let c = 0; c < C; c++) mx = Math.max(mx, logits.data[off + c]);
    let sum = 0;
    for (let c = 0; c < C; c++) {
      const e = Math.exp(logits.data[off + c] - mx);
      probs[off + c] = e;
      sum += e;
    }
    for (let c = 0; c < C; c++) probs[off + c] /= sum;
    total += -Math.log(Math.max(probs[off + y], 1e-300));
  }
  const data = Float64Array.of(total / N);
  return out(data, [1], [logits], (o) => () => {
    if (!logits.requiresGrad) return;
    const g = o.grad![0];
    const gx = logits.ensureGrad();
    for (let r = 0; r < N; r++) {
      const off = r * C;
      for (let c = 0; c < C; c++) {
        const indicator = c === labels[r] ? 1.0 : 0.0;
        gx[off + c] += (g * (probs[off + c] - indicator)) / N;
      }
    }
  });
}

/** Mean absolute error against a constant target. */
export function l1Loss(pred: Tensor, target: Float64Array | number[]): Tensor {
  if (target.length !== pred.size) throw new Error("target size mismatch");
  let total = 0;
  for (let i = 0; i < pred.size; i++) total += Math.abs(pred.data[i] - target[i]);
  const data = Float64Array.of(total / pred.size);
  return out(data, [1], [pred], (o) => () => {
    if (!pred.requiresGrad) return;
    const g = o.grad![0];
    const gx = pred.ensureGrad();
    for (let i = 0; i < pred.size; i++) {
      const d = pred.data[i] - target[i];
      gx[i] += (g * Math.sign(d)) / pred.size;
    }
  });
}

/** Sum of all elements, as a scalar. */
export function sumAll(x: Tensor): Tensor {
  let total = 0;
  for (let i = 0; i < x.size; i++) total += x.data[i];
  return out(Float64Array.of(total), [1], [x], (o) => () => {
    if (!x.requiresGrad) return;
    const g = o.grad![0];
    const gx = x.ensureGrad();
    for (let i = 0; i < x.size; i++) gx[i] += g;
  });
}

/** Weighted sum of scalar tensors. */
export function weightedSum(terms: Array<[Tensor, number]>): Tensor {
  let total = 0;
  for (const [t, w] of terms) total += t.item() * w;
  const data = Float64Array.of(total);
  return out(data, [1], terms.map(([t]) => t), (o) => () => {
    const g = o.grad![0];
    for (const [t, w] of terms) {
      if (t.requiresGrad) t.ensureGrad()[0] += g * w;
    }
  });
}

/** Reverse-mode backward pass from a scalar root. */
export function backward(root: Tensor): void {
  if (root.size !== 1) throw new Error("backward needs a scalar root");
  const order: Tensor[] = [];
  const seen = new Set<Tensor>();
  const visit = (t: Tensor) => {
    if (seen.has(t) || !t.requiresGrad) return;
    seen.add(t);
    for (const p of t.parents) visit(p);
    order.push(t);
  };
  visit(root);
  root.ensureGrad()[0] = 1.0;
  for (let i = order.length - 1; i >= 0; i--) {
    order[i].backwardFn?.();
  }
}
