//! Choosing and tracking modes among the eigenpairs of a reduced matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, mismatch};
use crate::linalg::{C64, CMat, CVec, eig_dense};

/// Relative width within which two scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// One eigenpair of a reduced matrix: `β` is scaled so that `βᴴα = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub lambda: C64,
    pub alpha: CVec,
    pub beta: CVec,
}

pub fn candidates(reduced: &CMat) -> Result<Vec<Candidate>> {
    let eig = eig_dense(reduced)?;
    Ok((0..eig.values.len())
        .map(|i| Candidate { lambda: eig.values[i], alpha: eig.right.column(i).into_owned(), beta: eig.left.column(i).into_owned() })
        .collect())
}

/// How the first mode is picked from the spectrum of the reduced matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Selector {
    /// Eigenvalue nearest `target`.
    Nearest { target: C64 },
    /// Position in the spectrum sorted by real part, then imaginary part.
    Index { index: usize },
    /// Largest `|pᴴα| / ‖α‖`.
    Pattern { pattern: Vec<C64> },
    /// Largest normalized objective `|α_oᴴ ℰ₀ᴴ ℰ α|`; re-applied every iteration.
    Objective { pattern: Vec<C64> },
}

impl Default for Selector {
    fn default() -> Self {
        Selector::Index { index: 0 }
    }
}

impl Selector {
    /// Candidate indices ordered best first.
    pub fn rank(&self, cands: &[Candidate], initial_right: &CMat, current_right: &CMat) -> Result<Vec<usize>> {
        if cands.is_empty() {
            return Err(Error::InsufficientData("no candidate modes".into()));
        }
        match self {
            Selector::Nearest { target } => Ok(rank_desc(&cands.iter().map(|c| -(c.lambda - target).norm()).collect::<Vec<_>>())),
            Selector::Index { index } => {
                let order = spectral_order(cands);
                if *index >= order.len() {
                    return Err(Error::InvalidConfig(format!("mode index {index} beyond {} candidates", order.len())));
                }
                let mut out = vec![order[*index]];
                out.extend(order.iter().copied().filter(|&k| k != order[*index]));
                Ok(out)
            }
            Selector::Pattern { pattern } => {
                let p = CVec::from_column_slice(pattern);
                if p.len() != cands[0].alpha.len() {
                    return Err(mismatch(format!("pattern length {} for subspace dimension {}", p.len(), cands[0].alpha.len())));
                }
                let scores: Vec<f64> = cands.iter().map(|c| p.dotc(&c.alpha).norm() / c.alpha.norm()).collect();
                Ok(rank_desc(&scores))
            }
            Selector::Objective { pattern } => {
                let p = CVec::from_column_slice(pattern);
                let alphas: Vec<CVec> = cands.iter().map(|c| c.alpha.clone()).collect();
                Ok(rank_desc(&objective_scores(&p, initial_right, current_right, &alphas)?))
            }
        }
    }

    pub fn is_objective(&self) -> bool {
        matches!(self, Selector::Objective { .. })
    }
}

/// Indices sorted by real part, then imaginary part, then index.
pub fn spectral_order(cands: &[Candidate]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cands.len()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = (cands[i].lambda, cands[j].lambda);
        a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)).then(i.cmp(&j))
    });
    idx
}

/// Descending order; scores within the tie tolerance keep index order.
fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(scores.len());
    let mut left: Vec<usize> = (0..scores.len()).collect();
    while !left.is_empty() {
        let best = left.iter().map(|&k| scores[k]).fold(f64::NEG_INFINITY, f64::max);
        let width = TIE_TOLERANCE * best.abs().max(f64::MIN_POSITIVE);
        let pos = left.iter().position(|&k| scores[k] >= best - width).unwrap_or(0);
        out.push(left.remove(pos));
    }
    out
}

fn objective_scores(pattern: &CVec, initial_right: &CMat, current_right: &CMat, alphas: &[CVec]) -> Result<Vec<f64>> {
    if pattern.len() != initial_right.ncols() || initial_right.nrows() != current_right.nrows() {
        return Err(mismatch(format!(
            "objective of length {} against initial basis {}x{}",
            pattern.len(),
            initial_right.nrows(),
            initial_right.ncols()
        )));
    }
    let transfer = initial_right.ad_mul(current_right);
    let row = transfer.ad_mul(pattern);
    alphas
        .iter()
        .map(|a| {
            if a.len() != current_right.ncols() {
                return Err(mismatch("candidate length differs from subspace dimension"));
            }
            let lifted = (current_right * a).norm();
            Ok(if lifted > 0.0 { row.dotc(a).norm() / lifted } else { 0.0 })
        })
        .collect()
}

/// `argmax_k |α_oᴴ ℰ₀ᴴ ℰ_prev α_k| / ‖ℰ_prev α_k‖`, lowest index on ties.
pub fn select_mode_objective(pattern: &CVec, initial_right: &CMat, current_right: &CMat, alphas: &[CVec]) -> Result<usize> {
    if alphas.is_empty() {
        return Err(Error::InsufficientData("no candidate modes".into()));
    }
    Ok(rank_desc(&objective_scores(pattern, initial_right, current_right, alphas)?)[0])
}

/// Rule for following one mode from iteration to iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tracking {
    NearestEigenvalue,
    /// Largest `|tᴴEℰα| / ‖ℰα‖` with `t` the previous left relevant vector
    /// `ℱβ`; ties fall back to the nearest eigenvalue.
    Overlap,
}

/// State carried between iterations for [`track`].
#[derive(Debug, Clone)]
pub struct TrackState {
    pub lambda: C64,
    /// `ℱβ` of the previous estimate.
    pub left: CVec,
}

/// Index of the candidate continuing the tracked mode.
pub fn track(rule: Tracking, prev: &TrackState, e_right: &CMat, right: &CMat, cands: &[Candidate]) -> usize {
    let near = |k: usize| (cands[k].lambda - prev.lambda).norm();
    let by_distance = || (0..cands.len()).min_by(|&i, &j| near(i).total_cmp(&near(j))).unwrap_or(0);
    match rule {
        Tracking::NearestEigenvalue => by_distance(),
        Tracking::Overlap => {
            let u = e_right.ad_mul(&prev.left);
            let scores: Vec<f64> = cands
                .iter()
                .map(|c| {
                    let lifted = (right * &c.alpha).norm();
                    if lifted > 0.0 { u.dotc(&c.alpha).norm() / lifted } else { 0.0 }
                })
                .collect();
            let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(best > 0.0) {
                return by_distance();
            }
            let width = TIE_TOLERANCE * best;
            (0..cands.len()).filter(|&k| scores[k] >= best - width).min_by(|&i, &j| near(i).total_cmp(&near(j))).unwrap_or(0)
        }
    }
}

/// Greedy pairing of tracked modes to new candidates: repeatedly takes the
/// globally largest normalized overlap `|pᴴq| / (‖p‖‖q‖)`, ties going to the
/// lower mode index and then the lower candidate index. Returns, for each
/// previous vector, the index of its candidate.
pub fn pair_modes(prev: &[CVec], new: &[CVec]) -> Result<Vec<usize>> {
    if prev.is_empty() || new.len() < prev.len() {
        return Err(Error::InsufficientData(format!("{} candidates for {} modes", new.len(), prev.len())));
    }
    let mut scored = Vec::with_capacity(prev.len() * new.len());
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in new.iter().enumerate() {
            if p.len() != q.len() {
                return Err(mismatch("paired vectors differ in length"));
            }
            let d = p.norm() * q.norm();
            scored.push((if d > 0.0 { p.dotc(q).norm() / d } else { 0.0 }, i, j));
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![usize::MAX; prev.len()];
    let mut used = vec![false; new.len()];
    for (_, i, j) in scored {
        if out[i] == usize::MAX && !used[j] {
            out[i] = j;
            used[j] = true;
        }
    }
    Ok(out)
}

/// Assigns one distinct candidate per selector, in selector order.
pub fn select_distinct(selectors: &[Selector], cands: &[Candidate], initial_right: &CMat, current_right: &CMat) -> Result<Vec<usize>> {
    if selectors.len() > cands.len() {
        return Err(Error::InvalidConfig(format!("{} targets for {} candidate modes", selectors.len(), cands.len())));
    }
    let mut taken = Vec::with_capacity(selectors.len());
    for s in selectors {
        let order = s.rank(cands, initial_right, current_right)?;
        let pick = order.into_iter().find(|k| !taken.contains(k)).expect("more candidates than selectors");
        taken.push(pick);
    }
    Ok(taken)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn unit(n: usize, i: usize) -> CVec {
        let mut v = CVec::zeros(n);
        v[i] = ONE;
        v
    }

    fn cand(l: f64, alpha: CVec) -> Candidate {
        Candidate { lambda: C64::new(l, 0.0), beta: alpha.clone(), alpha }
    }

    #[test]
    fn pairing_recovers_permutation() {
        let prev: Vec<CVec> = (0..3).map(|i| unit(3, i)).collect();
        let new = vec![prev[2].clone(), prev[0].clone(), prev[1].clone()];
        assert_eq!(pair_modes(&prev, &new).unwrap(), vec![1, 2, 0]);
    }

    #[test]
    fn pairing_with_noise_is_identity() {
        let prev: Vec<CVec> = (0..3).map(|i| unit(3, i)).collect();
        let new: Vec<CVec> = prev.iter().map(|p| p + CVec::from_element(3, C64::new(1e-3, -2e-3))).collect();
        assert_eq!(pair_modes(&prev, &new).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn greedy_pairing_is_pinned() {
        // Normalized overlaps (rows: modes, cols: candidates):
        // 0.6/0.55/0, 0.58/0.1/0, 0/0/0.9. Greedy takes (2,2), then (0,0), and
        // strands mode 1 on candidate 1; the optimal assignment swaps 0 and 1.
        let raw = [[0.6, 0.55, 0.0], [0.58, 0.1, 0.0], [0.0, 0.0, 0.9]];
        let prev: Vec<CVec> = (0..3).map(|i| unit(6, i)).collect();
        let new: Vec<CVec> = (0..3)
            .map(|j| {
                let mut q = CVec::zeros(6);
                let mut sq = 0.0;
                for i in 0..3 {
                    q[i] = C64::new(raw[i][j], 0.0);
                    sq += raw[i][j] * raw[i][j];
                }
                q[3 + j] = C64::new((1.0 - sq).sqrt(), 0.0);
                q
            })
            .collect();
        let greedy = pair_modes(&prev, &new).unwrap();
        assert_eq!(greedy, vec![0, 1, 2]);
        let total = |p: &[usize]| -> f64 { (0..3).map(|i| prev[i].dotc(&new[p[i]]).norm()).sum() };
        let optimal = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
            .iter()
            .max_by(|a, b| total(&a[..]).total_cmp(&total(&b[..])))
            .unwrap();
        assert_eq!(optimal, &[1, 0, 2]);
        assert!(total(optimal) > total(&greedy) + 0.4);
    }

    #[test]
    fn objective_picks_aligned_candidate_and_ignores_phase() {
        let id = CMat::identity(3, 3);
        let alphas: Vec<CVec> = (0..3).map(|i| unit(3, i)).collect();
        let target = unit(3, 2);
        assert_eq!(select_mode_objective(&target, &id, &id, &alphas).unwrap(), 2);
        let flipped: Vec<CVec> = alphas.iter().map(|a| -a).collect();
        assert_eq!(select_mode_objective(&target, &id, &id, &flipped).unwrap(), 2);
    }

    #[test]
    fn index_selector_sorts_by_real_then_imaginary() {
        let c = vec![
            cand(2.0, unit(3, 0)),
            Candidate { lambda: C64::new(1.0, 1.0), alpha: unit(3, 1), beta: unit(3, 1) },
            Candidate { lambda: C64::new(1.0, -1.0), alpha: unit(3, 2), beta: unit(3, 2) },
        ];
        let id = CMat::identity(3, 3);
        assert_eq!(Selector::Index { index: 0 }.rank(&c, &id, &id).unwrap()[0], 2);
        assert_eq!(Selector::Index { index: 2 }.rank(&c, &id, &id).unwrap()[0], 0);
        assert!(Selector::Index { index: 3 }.rank(&c, &id, &id).is_err());
    }

    #[test]
    fn overlap_tracking_breaks_ties_by_distance() {
        let a = CVec::from_vec(vec![ONE, ONE]);
        let c = vec![cand(5.0, a.clone()), cand(1.1, a)];
        let prev = TrackState { lambda: C64::new(1.0, 0.0), left: unit(2, 0) };
        let id = CMat::identity(2, 2);
        assert_eq!(track(Tracking::Overlap, &prev, &id, &id, &c), 1);
        let c = vec![cand(1.0, unit(2, 1)), cand(7.0, unit(2, 0))];
        assert_eq!(track(Tracking::Overlap, &prev, &id, &id, &c), 1);
        assert_eq!(track(Tracking::NearestEigenvalue, &prev, &id, &id, &c), 0);
    }

    #[test]
    fn distinct_selection() {
        let c = vec![cand(1.0, unit(2, 0)), cand(1.1, unit(2, 1))];
        let id = CMat::identity(2, 2);
        let s = vec![Selector::Nearest { target: C64::new(1.0, 0.0) }, Selector::Nearest { target: C64::new(1.0, 0.0) }];
        assert_eq!(select_distinct(&s, &c, &id, &id).unwrap(), vec![0, 1]);
    }
}
