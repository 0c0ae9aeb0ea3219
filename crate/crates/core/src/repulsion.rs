//! Choice of sub-stroke signs maximizing the variance of `|E|²`.
//!
//! Flipping every sign leaves `|E|²` unchanged, so the first sub-stroke is
//! pinned to `+` and the search space has `2^(n-1)` configurations.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{electric_field, ElectricField, SubstrokeFields};
use crate::grid::Grid;
use crate::stroke::{Sign, StrokeScene};

/// Largest sub-stroke count accepted by [`brute_force_flips`].
pub const BRUTE_FORCE_MAX: usize = 20;
pub const DEFAULT_VTH1: f64 = FRAC_PI_2;
pub const DEFAULT_VTH2: f64 = PI;
pub const DEFAULT_RESTARTS: usize = 4;
/// Relative margin a candidate must beat the current objective by.
pub const ACCEPT_REL_TOL: f64 = 1e-10;
/// Relative tolerance under which two objectives count as tied.
pub const TIE_REL_TOL: f64 = 1e-12;

fn variance(data: &[f64], mask: Option<&[bool]>) -> Result<f64> {
    let (mut n, mut sum) = (0usize, 0.0);
    for (i, &v) in data.iter().enumerate() {
        if mask.is_none_or(|m| m[i]) {
            n += 1;
            sum += v;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let mean = sum / n as f64;
    let mut acc = 0.0;
    for (i, &v) in data.iter().enumerate() {
        if mask.is_none_or(|m| m[i]) {
            acc += (v - mean) * (v - mean);
        }
    }
    Ok(acc / n as f64)
}

/// Population variance of `|E|²` over the pixels selected by `mask`.
pub fn variance_objective(e: &ElectricField, mask: Option<&Grid<bool>>) -> Result<f64> {
    let mag = e.magnitude_sq();
    if let Some(m) = mask {
        mag.ensure_same_dims(m)?;
    }
    variance(mag.data(), mask.map(|m| m.data()))
}

/// A sign per sub-stroke (indexed by `id - 1`) and the objective it reaches.
#[derive(Debug, Clone, PartialEq)]
pub struct SignConfiguration {
    pub signs: Vec<Sign>,
    pub objective: f64,
}

/// Negates every sign if needed so that the first is `+`.
pub fn pin(signs: &[Sign]) -> Vec<Sign> {
    match signs.first() {
        Some(Sign::Minus) => signs.iter().map(|s| s.flipped()).collect(),
        _ => signs.to_vec(),
    }
}

/// Pairwise interaction `score(i, j)`: mean `|V_i|` over the pixels of
/// `s_j`, averaged with `score(j, i)`. Indexed by `id - 1`.
pub fn interaction_scores(scene: &StrokeScene, fields: &SubstrokeFields) -> Result<Vec<Vec<f64>>> {
    let n = scene.len();
    let mut raw = vec![vec![0.0; n]; n];
    for (i, row) in raw.iter_mut().enumerate() {
        let f = fields.field(i as u32 + 1)?;
        for (j, s) in scene.substrokes().iter().enumerate() {
            if i != j {
                row[j] = s.pixels.iter().map(|&p| f[p].abs()).sum::<f64>() / s.len() as f64;
            }
        }
    }
    Ok((0..n)
        .map(|i| (0..n).map(|j| (raw[i][j] + raw[j][i]) / 2.0).collect())
        .collect())
}

/// Groups of sub-stroke ids flipped together by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipGroupList {
    /// Singletons in ascending id order, then multi-stroke groups by
    /// descending strongest internal interaction.
    pub groups: Vec<Vec<u32>>,
    pub vth1: f64,
    pub vth2: f64,
}

impl FlipGroupList {
    pub fn singletons(n: usize) -> Self {
        Self {
            groups: (1..=n as u32).map(|i| vec![i]).collect(),
            vth1: DEFAULT_VTH1,
            vth2: DEFAULT_VTH2,
        }
    }

    pub fn multi(&self) -> impl Iterator<Item = &Vec<u32>> {
        self.groups.iter().filter(|g| g.len() > 1)
    }
}

fn components(scores: &[Vec<f64>], threshold: f64) -> Vec<Vec<u32>> {
    let n = scores.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if scores[i][j] > threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i as u32 + 1);
    }
    groups.into_iter().filter(|g| g.len() > 1).collect()
}

pub fn build_groups(scene: &StrokeScene, fields: &SubstrokeFields, vth1: f64, vth2: f64) -> Result<FlipGroupList> {
    if !(vth1 > 0.0 && vth2 > 0.0) {
        return Err(Error::Config(format!("thresholds must be positive, got {vth1}, {vth2}")));
    }
    let scores = interaction_scores(scene, fields)?;
    Ok(groups_from_scores(&scores, vth1, vth2))
}

/// Group list from a precomputed interaction matrix.
pub fn groups_from_scores(scores: &[Vec<f64>], vth1: f64, vth2: f64) -> FlipGroupList {
    let mut multi: Vec<(f64, Vec<u32>)> = Vec::new();
    for g in components(scores, vth1).into_iter().chain(components(scores, vth2)) {
        if multi.iter().any(|(_, m)| *m == g) {
            continue;
        }
        let strongest = g
            .iter()
            .flat_map(|&a| g.iter().map(move |&b| (a, b)))
            .filter(|(a, b)| a < b)
            .map(|(a, b)| scores[a as usize - 1][b as usize - 1])
            .fold(0.0, f64::max);
        multi.push((strongest, g));
    }
    multi.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let mut groups: Vec<Vec<u32>> = (1..=scores.len() as u32).map(|i| vec![i]).collect();
    groups.extend(multi.into_iter().map(|(_, g)| g));
    FlipGroupList { groups, vth1, vth2 }
}

/// Per-sub-stroke electric fields, so any sign configuration's `Ω` is a
/// signed sum followed by one variance.
#[derive(Debug, Clone)]
pub struct FlipEvaluator {
    ex: Vec<Vec<f64>>,
    ey: Vec<Vec<f64>>,
    mask: Option<Vec<bool>>,
    len: usize,
}

impl FlipEvaluator {
    pub fn new(fields: &SubstrokeFields, mask: Option<&Grid<bool>>) -> Result<Self> {
        let (w, h) = fields.dims();
        if let Some(m) = mask {
            if m.dims() != (w, h) {
                return Err(Error::Dimensions {
                    expected: (w, h),
                    got: m.dims(),
                });
            }
            if !m.data().iter().any(|&b| b) {
                return Err(Error::EmptyMask);
            }
        }
        let per: Vec<ElectricField> = (1..=fields.len() as u32)
            .into_par_iter()
            .map(|id| electric_field(fields.field(id)?))
            .collect::<Result<_>>()?;
        let (ex, ey) = per.into_iter().map(|e| (e.ex.into_vec(), e.ey.into_vec())).unzip();
        Ok(Self {
            ex,
            ey,
            mask: mask.map(|m| m.data().to_vec()),
            len: w * h,
        })
    }

    pub fn substroke_count(&self) -> usize {
        self.ex.len()
    }

    fn field_sum(&self, signs: &[Sign]) -> (Vec<f64>, Vec<f64>) {
        let mut ex = vec![0.0; self.len];
        let mut ey = vec![0.0; self.len];
        for ((fx, fy), s) in self.ex.iter().zip(&self.ey).zip(signs) {
            let v = s.value();
            for (a, b) in ex.iter_mut().zip(fx) {
                *a += v * b;
            }
            for (a, b) in ey.iter_mut().zip(fy) {
                *a += v * b;
            }
        }
        (ex, ey)
    }

    fn omega(&self, ex: &[f64], ey: &[f64]) -> f64 {
        let mag: Vec<f64> = ex.iter().zip(ey).map(|(a, b)| a * a + b * b).collect();
        variance(&mag, self.mask.as_deref()).expect("mask checked non-empty")
    }

    /// `Ω` of a configuration, computed from scratch in id order.
    pub fn objective(&self, signs: &[Sign]) -> Result<f64> {
        if signs.len() != self.ex.len() {
            return Err(Error::Config(format!(
                "{} signs for {} sub-strokes",
                signs.len(),
                self.ex.len()
            )));
        }
        let (ex, ey) = self.field_sum(signs);
        Ok(self.omega(&ex, &ey))
    }

    /// `Ω` after flipping the sub-strokes in `group` on top of the current
    /// field `(ex, ey)` produced by `signs`.
    fn candidate(&self, ex: &[f64], ey: &[f64], signs: &[Sign], group: &[u32]) -> f64 {
        let mut cx = ex.to_vec();
        let mut cy = ey.to_vec();
        for &id in group {
            let i = id as usize - 1;
            let f = -2.0 * signs[i].value();
            for (a, b) in cx.iter_mut().zip(&self.ex[i]) {
                *a += f * b;
            }
            for (a, b) in cy.iter_mut().zip(&self.ey[i]) {
                *a += f * b;
            }
        }
        self.omega(&cx, &cy)
    }
}

/// One candidate evaluation of the greedy sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub run: usize,
    pub sweep: usize,
    /// Index into [`FlipGroupList::groups`].
    pub group: usize,
    pub before: f64,
    pub after: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    /// Best configuration over all runs, first sign pinned to `+`.
    pub best: SignConfiguration,
    /// Final objective of each run; run 0 starts from the initial signs.
    pub runs: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

impl OptimizeOutcome {
    /// Tab-separated `run sweep group before after accepted` rows.
    pub fn log(&self) -> String {
        let mut out = String::from("run\tsweep\tgroup\tomega_before\tomega_after\taccepted\n");
        for r in &self.trace {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.12e}\t{:.12e}\t{}",
                r.run, r.sweep, r.group, r.before, r.after, r.accepted
            );
        }
        out
    }
}

fn greedy_run(
    eval: &FlipEvaluator,
    groups: &FlipGroupList,
    mut signs: Vec<Sign>,
    run: usize,
    trace: &mut Vec<TraceRow>,
) -> SignConfiguration {
    let (mut ex, mut ey) = eval.field_sum(&signs);
    let mut current = eval.omega(&ex, &ey);
    let mut sweep = 0;
    loop {
        let mut flipped = false;
        for (gi, group) in groups.groups.iter().enumerate() {
            let after = eval.candidate(&ex, &ey, &signs, group);
            let accepted = after > current + ACCEPT_REL_TOL * current.abs();
            trace.push(TraceRow {
                run,
                sweep,
                group: gi,
                before: current,
                after,
                accepted,
            });
            if accepted {
                for &id in group {
                    let i = id as usize - 1;
                    signs[i] = signs[i].flipped();
                }
                (ex, ey) = eval.field_sum(&signs);
                current = eval.omega(&ex, &ey);
                flipped = true;
            }
        }
        sweep += 1;
        if !flipped {
            break;
        }
    }
    SignConfiguration {
        signs: pin(&signs),
        objective: current,
    }
}

/// Greedy group flipping from `initial`, then from `restarts - 1` random
/// starts drawn from `seed`. Keeps the best run (earliest on ties).
pub fn optimize_flips(
    eval: &FlipEvaluator,
    groups: &FlipGroupList,
    initial: &[Sign],
    restarts: usize,
    seed: u64,
) -> Result<OptimizeOutcome> {
    let n = eval.substroke_count();
    if initial.len() != n {
        return Err(Error::Config(format!("{} initial signs for {n} sub-strokes", initial.len())));
    }
    if let Some(bad) = groups.groups.iter().flatten().find(|&&id| id == 0 || id as usize > n) {
        return Err(Error::UnknownSubstroke(*bad));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Vec::new();
    let mut runs = Vec::new();
    let mut best: Option<SignConfiguration> = None;
    for run in 0..restarts.max(1) {
        let start = if run == 0 {
            initial.to_vec()
        } else {
            (0..n)
                .map(|_| if rng.gen::<bool>() { Sign::Plus } else { Sign::Minus })
                .collect()
        };
        let result = greedy_run(eval, groups, start, run, &mut trace);
        runs.push(result.objective);
        if best.as_ref().is_none_or(|b| result.objective > b.objective) {
            best = Some(result);
        }
    }
    Ok(OptimizeOutcome {
        best: best.expect("at least one run"),
        runs,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceOutcome {
    pub best: SignConfiguration,
    /// Number of configurations evaluated, `2^(n-1)` (1 when `n = 0`).
    pub evaluated: usize,
}

fn lexicographically_smaller(a: &[Sign], b: &[Sign]) -> bool {
    a < b
}

/// Exhaustive maximum of `Ω` with the first sign pinned to `+`. Ties within
/// [`TIE_REL_TOL`] go to the lexicographically smallest sign vector
/// (`-` before `+`).
pub fn brute_force_flips(eval: &FlipEvaluator) -> Result<BruteForceOutcome> {
    let n = eval.substroke_count();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooManySubstrokes(n));
    }
    let mut signs = vec![Sign::Plus; n];
    if n == 0 {
        return Ok(BruteForceOutcome {
            best: SignConfiguration {
                objective: eval.objective(&signs)?,
                signs,
            },
            evaluated: 1,
        });
    }
    let total = 1usize << (n - 1);
    let (mut ex, mut ey) = eval.field_sum(&signs);
    let mut best = SignConfiguration {
        signs: signs.clone(),
        objective: eval.omega(&ex, &ey),
    };
    for k in 1..total {
        // Gray code: flip the sub-stroke after the pinned one at the lowest set bit
        let i = k.trailing_zeros() as usize + 1;
        let f = -2.0 * signs[i].value();
        for (a, b) in ex.iter_mut().zip(&eval.ex[i]) {
            *a += f * b;
        }
        for (a, b) in ey.iter_mut().zip(&eval.ey[i]) {
            *a += f * b;
        }
        signs[i] = signs[i].flipped();
        let omega = eval.omega(&ex, &ey);
        let scale = omega.abs().max(best.objective.abs());
        let tied = (omega - best.objective).abs() <= TIE_REL_TOL * scale;
        if (!tied && omega > best.objective) || (tied && lexicographically_smaller(&signs, &best.signs)) {
            best = SignConfiguration {
                signs: signs.clone(),
                objective: omega,
            };
        }
    }
    best.objective = eval.objective(&best.signs)?;
    Ok(BruteForceOutcome { best, evaluated: total })
}

/// Whether two objectives agree within `rel` of their magnitude.
pub fn objectives_match(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
