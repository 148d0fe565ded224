//! Seeded checks of the scoring head against independent brute-force
//! computations: finite-difference gradients, the loss decomposition and
//! mask soundness, and span decoding.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::head::{
    decode_spans, extract_rationale, gradients, loss_ext, loss_wae, score_matrix, DecodeMode, DecodedSpan, FfnParams,
    LegalRegion, LossOptions, Matrix, Overlap, Reduction, ScoreMatrix, TargetMatrix,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelftestConfig {
    pub seed: u64,
    pub gradient_cases: usize,
    pub mask_cases: usize,
    pub decode_cases: usize,
    pub fd_step: f64,
    pub gradient_tolerance: f64,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gradient_cases: 100,
            mask_cases: 1000,
            decode_cases: 500,
            fd_step: 1e-5,
            gradient_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
    pub seconds: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

/// A random layout with `m` tokens: separator position and legal region.
fn random_region(rng: &mut ChaCha8Rng, max_len: usize) -> LegalRegion {
    let m = rng.random_range(4..=max_len);
    let sep = rng.random_range(1..=m - 3);
    LegalRegion::new(sep, m)
}

fn random_targets(rng: &mut ChaCha8Rng, region: &LegalRegion) -> TargetMatrix {
    let y_cls = rng.random_bool(0.6);
    let mut positives = BTreeSet::new();
    if y_cls {
        for cell in region.cells() {
            if rng.random_bool(0.2) {
                positives.insert(cell);
            }
        }
    }
    TargetMatrix { y_cls, positives }
}

fn random_opts(rng: &mut ChaCha8Rng) -> LossOptions {
    LossOptions {
        negative_weight: if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.1..2.0) },
        reduction: if rng.random_bool(0.5) { Reduction::Sum } else { Reduction::Mean },
    }
}

/// The loss written out cell by cell from probabilities.
fn brute_loss(h: &Matrix, p: &FfnParams, t: &TargetMatrix, region: &LegalRegion, o: &LossOptions) -> f64 {
    let m = h.rows();
    let f: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let x = h.row(i);
            let hid: Vec<f64> = (0..p.hidden_dim())
                .map(|a| p.activation.apply((0..x.len()).map(|b| p.w1[(a, b)] * x[b]).sum::<f64>() + p.b1[a]))
                .collect();
            (0..p.input_dim()).map(|a| (0..hid.len()).map(|b| p.w2[(a, b)] * hid[b]).sum::<f64>() + p.b2[a]).collect()
        })
        .collect();
    let prob = |i: usize, j: usize| {
        let z: f64 = f[i].iter().zip(h.row(j)).map(|(a, b)| a * b).sum();
        1.0 / (1.0 + (-z).exp())
    };
    let bce = |q: f64, y: bool| if y { -q.ln() } else { -(1.0 - q).ln() };
    let mut ext = 0.0;
    let n = region.context_len();
    let cells = n * (n + 1) / 2;
    for i in 0..m {
        for j in i..m {
            if i > region.sep && j + 2 <= m {
                let y = t.positives.contains(&(i, j));
                let mut w = if y { 1.0 } else { o.negative_weight };
                if o.reduction == Reduction::Mean {
                    w /= cells as f64;
                }
                ext += w * bce(prob(i, j), y);
            }
        }
    }
    bce(prob(0, 0), t.y_cls) + ext
}

fn loss_at(h: &Matrix, p: &FfnParams, t: &TargetMatrix, region: &LegalRegion, o: &LossOptions) -> Result<f64> {
    Ok(loss_wae(&score_matrix(h, p)?, t, region, o)?.total)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Analytic gradients against central differences on every hidden entry
/// and every parameter; also compares the forward loss with [`brute_loss`].
pub fn check_gradients(cfg: &SelftestConfig) -> Result<CheckResult> {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut worst, mut failures) = (0.0f64, 0usize);
    let h_step = cfg.fd_step;
    for case in 0..cfg.gradient_cases {
        let region = random_region(&mut rng, 10);
        let d = rng.random_range(1..=4);
        let dh = rng.random_range(1..=4);
        let hidden = Matrix::from_fn(region.len, d, |_, _| rng.random_range(-1.0..1.0));
        let params = FfnParams::random(d, dh, 1.0, cfg.seed.wrapping_add(case as u64 + 1));
        let targets = random_targets(&mut rng, &region);
        let opts = random_opts(&mut rng);
        let (loss, grads) = gradients(&hidden, &params, &targets, &region, &opts)?;
        let forward_ok = rel_err(loss.total, brute_loss(&hidden, &params, &targets, &region, &opts)) < 1e-10;
        let mut case_worst = 0.0f64;

        for k in 0..hidden.as_slice().len() {
            let mut hp = hidden.clone();
            hp.as_mut_slice()[k] += h_step;
            let mut hm = hidden.clone();
            hm.as_mut_slice()[k] -= h_step;
            let fd = (loss_at(&hp, &params, &targets, &region, &opts)?
                - loss_at(&hm, &params, &targets, &region, &opts)?)
                / (2.0 * h_step);
            case_worst = case_worst.max(rel_err(grads.hidden.as_slice()[k], fd));
        }
        let analytic: Vec<f64> = grads.params.values().collect();
        for (k, a) in analytic.iter().enumerate() {
            let mut pp = params.clone();
            *pp.values_mut().nth(k).expect("index in range") += h_step;
            let mut pm = params.clone();
            *pm.values_mut().nth(k).expect("index in range") -= h_step;
            let fd = (loss_at(&hidden, &pp, &targets, &region, &opts)?
                - loss_at(&hidden, &pm, &targets, &region, &opts)?)
                / (2.0 * h_step);
            case_worst = case_worst.max(rel_err(*a, fd));
        }
        worst = worst.max(case_worst);
        if !forward_ok || case_worst >= cfg.gradient_tolerance {
            failures += 1;
        }
    }
    Ok(CheckResult {
        name: "gradient".into(),
        cases: cfg.gradient_cases,
        failures,
        max_error: Some(worst),
        seconds: t0.elapsed().as_secs_f64(),
        passed: failures == 0,
    })
}

fn random_scores(rng: &mut ChaCha8Rng, m: usize, coarse: bool) -> ScoreMatrix {
    let probs = Matrix::from_fn(m, m, |_, _| {
        if coarse {
            // few distinct values so ties are common
            f64::from(rng.random_range(1..20u8)) / 20.0
        } else {
            rng.random_range(0.001..0.999)
        }
    });
    ScoreMatrix::from_probs(&probs).expect("probabilities in (0, 1)")
}

fn all_decodes(s: &ScoreMatrix, region: &LegalRegion) -> Vec<Vec<DecodedSpan>> {
    vec![
        decode_spans(s, region, DecodeMode::multi(Overlap::Flat)),
        decode_spans(s, region, DecodeMode::multi(Overlap::Nested)),
        decode_spans(s, region, DecodeMode::Single),
    ]
}

/// `total == cls + ext` exactly, and changing any cell outside the legal
/// region leaves the extraction loss and every decode untouched.
pub fn check_mask(cfg: &SelftestConfig) -> Result<CheckResult> {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6d61_736b);
    let mut failures = 0usize;
    for _ in 0..cfg.mask_cases {
        let region = random_region(&mut rng, 12);
        let m = region.len;
        let coarse = rng.random_bool(0.3);
        let scores = random_scores(&mut rng, m, coarse);
        let targets = random_targets(&mut rng, &region);
        let opts = random_opts(&mut rng);
        let loss = loss_wae(&scores, &targets, &region, &opts)?;
        let mut ok = loss.total == loss.cls + loss.ext;
        let illegal: Vec<(usize, usize)> =
            (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|&(i, j)| !region.contains(i, j)).collect();
        let (i, j) = illegal[rng.random_range(0..illegal.len())];
        let mut perturbed = scores.clone();
        perturbed.set_logit(i, j, scores.logit(i, j) + rng.random_range(-20.0..20.0));
        ok &= loss_ext(&perturbed, &targets, &region, &opts)? == loss.ext;
        ok &= all_decodes(&perturbed, &region) == all_decodes(&scores, &region);
        failures += usize::from(!ok);
    }
    Ok(CheckResult {
        name: "loss-decomposition-and-mask".into(),
        cases: cfg.mask_cases,
        failures,
        max_error: None,
        seconds: t0.elapsed().as_secs_f64(),
        passed: failures == 0,
    })
}

/// Reference decoder: enumerate every `(i, j)` with `i <= j` over the whole
/// matrix, keep those inside the context, then apply the selection rule with
/// a quadratic scan instead of a sort.
pub fn brute_decode(s: &ScoreMatrix, sep: usize, mode: DecodeMode) -> Vec<DecodedSpan> {
    let m = s.len();
    let mut cand = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i <= j && i > sep && j < m - 1 {
                cand.push(DecodedSpan { start: i - sep - 1, end: j - sep - 1, score: s.prob(i, j) });
            }
        }
    }
    let better = |a: &DecodedSpan, b: &DecodedSpan| {
        a.score > b.score || (a.score == b.score && (a.start, a.end) < (b.start, b.end))
    };
    let mut out: Vec<DecodedSpan> = match mode {
        DecodeMode::Single => {
            let mut best: Option<DecodedSpan> = None;
            for c in &cand {
                if best.is_none_or(|b| better(c, &b)) {
                    best = Some(*c);
                }
            }
            best.into_iter().collect()
        }
        DecodeMode::Multi { threshold, overlap } => {
            let mut left: Vec<DecodedSpan> = cand.into_iter().filter(|c| c.score > threshold).collect();
            if overlap == Overlap::Nested {
                left
            } else {
                let mut kept = Vec::new();
                while !left.is_empty() {
                    let mut k = 0;
                    for x in 1..left.len() {
                        if better(&left[x], &left[k]) {
                            k = x;
                        }
                    }
                    let top = left.swap_remove(k);
                    left.retain(|c| c.end < top.start || top.end < c.start);
                    kept.push(top);
                }
                kept
            }
        }
    };
    out.sort_by_key(|s| (s.start, s.end));
    out
}

/// Decoder output against [`brute_decode`] in flat, nested and single mode,
/// and the rationale against the single-mode answer.
pub fn check_decode(cfg: &SelftestConfig) -> Result<CheckResult> {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6465_636f);
    let mut failures = 0usize;
    for _ in 0..cfg.decode_cases {
        let region = random_region(&mut rng, 12);
        let coarse = rng.random_bool(0.5);
        let s = random_scores(&mut rng, region.len, coarse);
        let mut ok = true;
        for mode in [DecodeMode::multi(Overlap::Flat), DecodeMode::multi(Overlap::Nested), DecodeMode::Single] {
            ok &= decode_spans(&s, &region, mode) == brute_decode(&s, region.sep, mode);
        }
        ok &= extract_rationale(&s, &region).ok() == brute_decode(&s, region.sep, DecodeMode::Single).first().copied();
        failures += usize::from(!ok);
    }
    Ok(CheckResult {
        name: "decode".into(),
        cases: cfg.decode_cases,
        failures,
        max_error: None,
        seconds: t0.elapsed().as_secs_f64(),
        passed: failures == 0,
    })
}

pub fn run_selftest(cfg: &SelftestConfig) -> Result<SelftestReport> {
    let checks = vec![check_gradients(cfg)?, check_mask(cfg)?, check_decode(cfg)?];
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(SelftestReport { seed: cfg.seed, checks, all_passed })
}
