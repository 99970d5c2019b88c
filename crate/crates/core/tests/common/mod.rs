//! Independent scalar reference for the adaptation loop.
//!
//! Written from the algorithm description only: plain `Vec<f64>` arithmetic,
//! a Jacobi eigensolver on the text Gram matrix instead of an SVD library,
//! and no calls into the crate's numerical code.

#![allow(dead_code)]

use std::io::Write;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn ref_softmax(logits: &[f64], t: f64) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(t * b));
    let e: Vec<f64> = logits.iter().map(|&x| (t * x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

pub fn ref_renyi(p: &[f64], alpha: f64) -> f64 {
    let mut s = 0.0;
    for &x in p {
        if x > 0.0 {
            s += x.powf(alpha);
        }
    }
    s.powf(1.0 / (alpha - 1.0))
}

pub fn ref_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors as columns of a row-major n×n matrix)`.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Left singular vectors of the matrix whose columns are `cols`, sorted by
/// descending singular value, keeping those above `1e-6 · σ_max`.
pub fn ref_left_singular(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let j = cols.len();
    let d = cols[0].len();
    let mut gram = vec![0.0; j * j];
    for a in 0..j {
        for b in 0..j {
            gram[a * j + b] = dot(&cols[a], &cols[b]);
        }
    }
    let (vals, vecs) = jacobi_eigen(&gram, j);
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    let smax = vals[order[0]].max(0.0).sqrt();
    let mut out = Vec::new();
    for &i in &order {
        let s = vals[i].max(0.0).sqrt();
        if s < 1e-6 * smax {
            continue;
        }
        let mut u = vec![0.0; d];
        for (c, col) in cols.iter().enumerate() {
            let coef = vecs[c * j + i] / s;
            for k in 0..d {
                u[k] += coef * col[k];
            }
        }
        out.push(u);
    }
    out
}

/// Reference projector: the kept directions `e_2 ..= e_min(rank, max_rank)`.
pub struct RefProjector {
    pub e1: Vec<f64>,
    pub kept: Vec<Vec<f64>>,
}

impl RefProjector {
    pub fn new(unit_text: &[Vec<f64>], max_rank: usize) -> Self {
        let basis = ref_left_singular(unit_text);
        let end = basis.len().min(max_rank);
        RefProjector {
            e1: basis[0].clone(),
            kept: basis[1..end].to_vec(),
        }
    }

    pub fn raw(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for e in &self.kept {
            let c = dot(e, v);
            for k in 0..v.len() {
                out[k] += c * e[k];
            }
        }
        out
    }

    /// `None` when the projected norm is below `1e-8`.
    pub fn project(&self, v: &[f64]) -> Option<Vec<f64>> {
        let r = self.raw(v);
        let n = dot(&r, &r).sqrt();
        if n < 1e-8 {
            None
        } else {
            Some(r.iter().map(|x| x / n).collect())
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RefMode {
    Te,
    Oc,
    Full,
    Avg,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RefWeights {
    Uniform,
    Renyi,
}

pub struct RefConfig {
    pub mode: RefMode,
    pub weights: RefWeights,
    pub alpha: f64,
    pub beta: f64,
    pub temperature: f64,
    pub warmup: usize,
    pub views: usize,
    pub max_rank: usize,
}

impl RefConfig {
    pub fn defaults(classes: usize) -> Self {
        RefConfig {
            mode: RefMode::Full,
            weights: RefWeights::Renyi,
            alpha: 0.5,
            beta: 2.0,
            temperature: 100.0,
            warmup: 10 * classes,
            views: 64,
            max_rank: 150,
        }
    }
}

pub struct RefStep {
    pub text: Vec<f64>,
    pub fused: Vec<f64>,
    pub class: usize,
    pub warmup: bool,
}

pub struct RefEngine {
    pub cfg: RefConfig,
    pub text: Vec<Vec<f64>>,
    pub proj: RefProjector,
    pub centroids: Vec<Vec<f64>>,
    pub counts: Vec<u64>,
    pub seen: usize,
}

impl RefEngine {
    pub fn new(raw_text: &[Vec<f64>], cfg: RefConfig) -> Self {
        let text: Vec<Vec<f64>> = raw_text.iter().map(|t| unit(t)).collect();
        let proj = RefProjector::new(&text, cfg.max_rank);
        let centroids = text.iter().map(|t| proj.project(t).expect("text projects")).collect();
        let counts = vec![0; text.len()];
        RefEngine {
            cfg,
            text,
            proj,
            centroids,
            counts,
            seen: 0,
        }
    }

    fn merge(&self, preds: &[Vec<f64>]) -> (Vec<f64>, f64) {
        let use_renyi = self.cfg.weights == RefWeights::Renyi && self.cfg.mode != RefMode::Avg;
        let w: Vec<f64> = preds
            .iter()
            .map(|p| if use_renyi { ref_renyi(p, self.cfg.alpha) } else { 1.0 })
            .collect();
        let total: f64 = w.iter().sum();
        let j = preds[0].len();
        let mut out = vec![0.0; j];
        for (p, wb) in preds.iter().zip(&w) {
            for c in 0..j {
                out[c] += wb * p[c];
            }
        }
        (out.iter().map(|x| x / total).collect(), total)
    }

    pub fn step(&mut self, views: &[Vec<f64>]) -> RefStep {
        let views = &views[..views.len().min(self.cfg.views)];
        let t = self.cfg.temperature;
        let mut text_preds = Vec::new();
        let mut cluster_preds = Vec::new();
        let mut projected = Vec::new();
        for v in views {
            let u = unit(v);
            let cos: Vec<f64> = self.text.iter().map(|tj| dot(tj, &u)).collect();
            text_preds.push(ref_softmax(&cos, t));
            if let Some(vh) = self.proj.project(&u) {
                let sims: Vec<f64> = self.centroids.iter().map(|w| dot(w, &vh)).collect();
                cluster_preds.push(ref_softmax(&sims, t));
                projected.push(vh);
            }
        }
        let (p_text, _) = self.merge(&text_preds);
        let warmup = self.seen < self.cfg.warmup;
        let fused = if cluster_preds.is_empty() || warmup || self.cfg.mode == RefMode::Te {
            p_text.clone()
        } else {
            let (p_cl, _) = self.merge(&cluster_preds);
            match self.cfg.mode {
                RefMode::Oc => p_cl,
                _ => {
                    let b = self.cfg.beta;
                    (0..p_text.len())
                        .map(|c| b / (1.0 + b) * p_text[c] + 1.0 / (1.0 + b) * p_cl[c])
                        .collect()
                }
            }
        };
        let class = ref_argmax(&fused);
        if !projected.is_empty() {
            let d = projected[0].len();
            let mut mean = vec![0.0; d];
            for p in &projected {
                for k in 0..d {
                    mean[k] += p[k] / projected.len() as f64;
                }
            }
            let k = self.counts[class] as f64;
            let sum: Vec<f64> = (0..d).map(|i| k * self.centroids[class][i] + mean[i]).collect();
            let n = dot(&sum, &sum).sqrt();
            if n >= 1e-12 {
                self.centroids[class] = sum.iter().map(|x| x / n).collect();
                self.counts[class] += 1;
            }
        }
        self.seen += 1;
        RefStep {
            text: p_text,
            fused,
            class,
            warmup,
        }
    }
}

/// Writes straight to stdout so the line shows even under captured test output.
pub fn report_line(id: &str, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "\n{status} [{id}] {detail}");
    let _ = out.flush();
}
