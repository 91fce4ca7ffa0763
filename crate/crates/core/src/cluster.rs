//! Clustering-based adaptive estimator.
//!
//! The monitored cell is compared with every training cell through the
//! prefix distance of their aging-cycle charge-throughput trajectories. At
//! each new observation the nearest training cell becomes the current
//! classification index; the Ah-weighted share of steps each training cell
//! has won gives the weights `λ` used to blend the training cells'
//! normalized capacity curves.
//!
//! Training trajectories are interpolated onto the monitored cell's own Ah
//! grid as observations arrive, so cells need not share a sampling grid.
//! Classification indices are 0-based in the API and 1-based in text output.

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::io::parse_kv;
use crate::trajectory::{AhSequence, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingCell {
    pub cell_id: String,
    /// Aging-cycle charge throughput over Ah.
    pub q_age: Trajectory,
    /// C/20 capacity normalized by `q0`, over Ah.
    pub q_bar: Trajectory,
    /// Initial C/20 capacity, Ah.
    pub q0: f64,
    pub features: Vec<FeatureVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    cells: Vec<TrainingCell>,
}

impl TrainingSet {
    pub fn new(cells: Vec<TrainingCell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidTrainingSet("no training cells".into()));
        }
        for c in &cells {
            if !(c.q0 > 0.0) || !c.q0.is_finite() {
                return Err(Error::NonPositiveQ0(c.q0));
            }
            if c.q_age.is_empty() || c.q_bar.is_empty() {
                return Err(Error::InvalidTrainingSet(format!(
                    "cell {} has an empty trajectory",
                    c.cell_id
                )));
            }
            if c.q_bar.values().iter().any(|&v| !(v > 0.0)) {
                return Err(Error::InvalidTrainingSet(format!(
                    "cell {} has non-positive normalized capacity",
                    c.cell_id
                )));
            }
        }
        Ok(Self { cells })
    }

    pub fn cells(&self) -> &[TrainingCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Ah interval on which every training cell's `q_age` and `q_bar` are
    /// defined; `None` if the spans do not overlap.
    pub fn coverage(&self) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for c in &self.cells {
            for t in [&c.q_age, &c.q_bar] {
                let (a, b) = t.span()?;
                lo = lo.max(a);
                hi = hi.min(b);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// Prefix distance `sqrt(Σ_{i<n} (qx_i − qy_i)²)` over a shared grid.
pub fn trajectory_distance(qx: &Trajectory, qy: &Trajectory, n: usize) -> Result<f64> {
    let len = qx.len().min(qy.len());
    if n == 0 || n > len {
        return Err(Error::PrefixOutOfRange { n, len });
    }
    let (ax, ay) = (qx.ah(), qy.ah());
    if let Some(i) = (0..n).find(|&i| ax[i] != ay[i]) {
        return Err(Error::GridMismatch(format!(
            "abscissae differ at index {i}: {} vs {}",
            ax[i], ay[i]
        )));
    }
    let mut acc = 0.0;
    for i in 0..n {
        let d = qx.values()[i] - qy.values()[i];
        acc += d * d;
    }
    Ok(acc.sqrt())
}

/// Running classification of one monitored cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationState {
    sq_accum: Vec<f64>,
    s_seq: Vec<usize>,
    ah_seen: AhSequence,
    lambda: Vec<f64>,
    ah_mass: Vec<f64>,
    ah_total: f64,
}

impl ClassificationState {
    /// Fresh state for `k` training cells; `λ` starts uniform.
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidTrainingSet("no training cells".into()));
        }
        Ok(Self {
            sq_accum: vec![0.0; k],
            s_seq: Vec::new(),
            ah_seen: AhSequence::default(),
            lambda: vec![1.0 / k as f64; k],
            ah_mass: vec![0.0; k],
            ah_total: 0.0,
        })
    }

    pub fn k(&self) -> usize {
        self.sq_accum.len()
    }

    /// Running squared-difference sums, Ah².
    pub fn sq_accum(&self) -> &[f64] {
        &self.sq_accum
    }

    pub fn s_seq(&self) -> &[usize] {
        &self.s_seq
    }

    pub fn ah_seen(&self) -> &AhSequence {
        &self.ah_seen
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.s_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_seq.is_empty()
    }

    /// Current distance to every training cell.
    pub fn distances(&self) -> Vec<f64> {
        self.sq_accum.iter().map(|s| s.sqrt()).collect()
    }

    /// Flat `key = value` snapshot for resuming a session.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let s: Vec<String> = self.s_seq.iter().map(|s| (s + 1).to_string()).collect();
        format!(
            "# classification state\nk = {}\nsq_accum = {}\ns_seq = {}\nah_seen = {}\nlambda = {}\n",
            self.k(),
            join(&self.sq_accum),
            s.join(","),
            join(&self.ah_seen),
            join(&self.lambda),
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        let field = |key: &str| {
            kv.get(key)
                .map(String::as_str)
                .ok_or_else(|| Error::InvalidConfig(format!("state snapshot missing `{key}`")))
        };
        let floats = |key: &str| -> Result<Vec<f64>> {
            let raw = field(key)?;
            raw.split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidConfig(format!("state key `{key}`: {e}")))
                })
                .collect()
        };
        let k: usize = field("k")?
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("state key `k`: {e}")))?;
        let mut state = Self::new(k)?;
        let sq = floats("sq_accum")?;
        if sq.len() != k || sq.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidConfig("sq_accum must hold k non-negative values".into()));
        }
        let s_seq = floats("s_seq")?;
        let ah = floats("ah_seen")?;
        if s_seq.len() != ah.len() {
            return Err(Error::InvalidConfig("s_seq and ah_seen lengths differ".into()));
        }
        state.sq_accum = sq;
        state.ah_seen = AhSequence::new(ah)?;
        for (s, &a) in s_seq.iter().zip(state.ah_seen.iter()) {
            if s.fract() != 0.0 || *s < 1.0 || *s > k as f64 {
                return Err(Error::InvalidConfig(format!("classification index {s} out of 1..={k}")));
            }
            let idx = *s as usize - 1;
            state.s_seq.push(idx);
            state.ah_mass[idx] += a;
            state.ah_total += a;
        }
        state.refresh_lambda();
        Ok(state)
    }

    fn refresh_lambda(&mut self) {
        let k = self.k();
        if self.ah_total > 0.0 {
            for (l, m) in self.lambda.iter_mut().zip(&self.ah_mass) {
                *l = m / self.ah_total;
            }
        } else {
            self.lambda.iter_mut().for_each(|l| *l = 1.0 / k as f64);
        }
    }
}

/// Consumes one observation of the monitored cell and returns the new
/// classification index.
///
/// Every training `q_age` is interpolated at `ah_new`; the squared
/// difference is added to that cell's running sum. The nearest cell wins,
/// with ties going to the lowest index.
pub fn classify_step(
    state: &mut ClassificationState,
    training: &TrainingSet,
    q_age_new: f64,
    ah_new: f64,
) -> Result<usize> {
    if training.len() != state.k() {
        return Err(Error::DimensionMismatch(format!(
            "state tracks {} cells, training set has {}",
            state.k(),
            training.len()
        )));
    }
    if !q_age_new.is_finite() {
        return Err(Error::InvalidSequence(format!("non-finite q_age {q_age_new}")));
    }
    if let Some(&last) = state.ah_seen.last() {
        if !(ah_new > last) {
            return Err(Error::GridMismatch(format!(
                "Ah {ah_new} does not follow last processed {last}"
            )));
        }
    }
    let reference = training
        .cells
        .iter()
        .map(|c| {
            c.q_age.value_at(ah_new).map_err(|_| {
                Error::GridMismatch(format!(
                    "Ah {ah_new} outside training cell {}'s q_age span",
                    c.cell_id
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    state.ah_seen.push(ah_new)?;

    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (k, q_k) in reference.iter().enumerate() {
        let d = q_age_new - q_k;
        state.sq_accum[k] += d * d;
        let dist = state.sq_accum[k].sqrt();
        if dist < best_dist {
            best_dist = dist;
            best = k;
        }
    }
    state.s_seq.push(best);
    state.ah_mass[best] += ah_new;
    state.ah_total += ah_new;
    state.refresh_lambda();
    Ok(best)
}

/// `λ_k = Σ_{n: S_n = k} Ah_n / Σ_n Ah_n` recomputed from the full history.
///
/// When every processed point sits at `Ah = 0` there is no mass to share and
/// the weights are uniform.
pub fn lambda_weights(state: &ClassificationState) -> Result<Vec<f64>> {
    if state.s_seq.is_empty() {
        return Err(Error::EmptyState);
    }
    let k = state.k();
    let mut num = vec![0.0; k];
    let mut den = 0.0;
    for (&s, &ah) in state.s_seq.iter().zip(state.ah_seen.iter()) {
        num[s] += ah;
        den += ah;
    }
    if den > 0.0 {
        Ok(num.into_iter().map(|v| v / den).collect())
    } else {
        Ok(vec![1.0 / k as f64; k])
    }
}

/// Clustering estimate `q0_z · Σ_k λ_k · Q̄^k(ah)`.
pub fn estimate_ct(training: &TrainingSet, lambda: &[f64], q0_z: f64, ah: f64) -> Result<f64> {
    if lambda.len() != training.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} training cells",
            lambda.len(),
            training.len()
        )));
    }
    if lambda.iter().any(|&l| !(l >= 0.0)) || (lambda.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSequence(
            "lambda must be non-negative and sum to 1".into(),
        ));
    }
    if !(q0_z > 0.0) || !q0_z.is_finite() {
        return Err(Error::NonPositiveQ0(q0_z));
    }
    let mut blend = 0.0;
    for (cell, &l) in training.cells.iter().zip(lambda) {
        blend += l * cell.q_bar.value_at(ah)?;
    }
    Ok(q0_z * blend)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(id: &str, ah: &[f64], q_age: f64, q_bar: f64) -> TrainingCell {
        TrainingCell {
            cell_id: id.into(),
            q_age: Trajectory::from_vecs(ah.to_vec(), vec![q_age; ah.len()]).unwrap(),
            q_bar: Trajectory::from_vecs(ah.to_vec(), vec![q_bar; ah.len()]).unwrap(),
            q0: 30.0,
            features: Vec::new(),
        }
    }

    const GRID: [f64; 3] = [1.0, 2.0, 3.0];

    #[test]
    fn distance_examples() {
        let a = Trajectory::from_vecs(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        let b = Trajectory::from_vecs(vec![1.0, 2.0], vec![1.3, 2.4]).unwrap();
        assert!((trajectory_distance(&a, &b, 2).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(trajectory_distance(&a, &a, 2).unwrap(), 0.0);
        assert!(matches!(
            trajectory_distance(&a, &b, 3),
            Err(Error::PrefixOutOfRange { n: 3, len: 2 })
        ));
        assert!(matches!(
            trajectory_distance(&a, &b, 0),
            Err(Error::PrefixOutOfRange { .. })
        ));
        let c = Trajectory::from_vecs(vec![1.0, 2.5], vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            trajectory_distance(&a, &c, 2),
            Err(Error::GridMismatch(_))
        ));
        // a shared prefix is enough
        assert_eq!(trajectory_distance(&a, &c, 1).unwrap(), 0.0);
    }

    #[test]
    fn two_cell_classification() {
        let ts = TrainingSet::new(vec![flat("a", &GRID, 1.0, 1.0), flat("b", &GRID, 2.0, 1.0)])
            .unwrap();
        let mut st = ClassificationState::new(2).unwrap();
        let got: Vec<usize> = [1.9, 1.2, 1.2]
            .iter()
            .zip(GRID)
            .map(|(&q, ah)| classify_step(&mut st, &ts, q, ah).unwrap())
            .collect();
        assert_eq!(got, vec![1, 1, 0]);
        let d = st.distances();
        assert!((d[0] - 0.89f64.sqrt()).abs() < 1e-12);
        assert!((d[1] - 1.29f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_candidate_always_wins() {
        let ts = TrainingSet::new(vec![flat("a", &GRID, 1.0, 1.0)]).unwrap();
        let mut st = ClassificationState::new(1).unwrap();
        for (q, ah) in [(5.0, 1.0), (-3.0, 2.0), (0.0, 3.0)] {
            assert_eq!(classify_step(&mut st, &ts, q, ah).unwrap(), 0);
        }
        assert_eq!(st.lambda(), &[1.0]);
    }

    #[test]
    fn step_guards() {
        let ts = TrainingSet::new(vec![flat("a", &GRID, 1.0, 1.0)]).unwrap();
        let mut st = ClassificationState::new(1).unwrap();
        classify_step(&mut st, &ts, 1.0, 2.0).unwrap();
        assert!(matches!(
            classify_step(&mut st, &ts, 1.0, 2.0),
            Err(Error::GridMismatch(_))
        ));
        assert!(matches!(
            classify_step(&mut st, &ts, 1.0, 4.0),
            Err(Error::GridMismatch(_))
        ));
        // a failed step leaves the state untouched
        assert_eq!(st.len(), 1);
    }

    #[test]
    fn lambda_examples() {
        let ts = TrainingSet::new(vec![flat("a", &GRID, 1.0, 1.0), flat("b", &GRID, 2.0, 1.0)])
            .unwrap();
        let mut st = ClassificationState::new(2).unwrap();
        assert!(matches!(lambda_weights(&st), Err(Error::EmptyState)));
        assert_eq!(st.lambda(), &[0.5, 0.5]);
        for (q, ah) in [(1.0, 1.0), (1.0, 2.0), (2.0, 3.0)] {
            classify_step(&mut st, &ts, q, ah).unwrap();
        }
        // S = [a, a, a]: the third point is still closer to a overall
        assert_eq!(lambda_weights(&st).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn lambda_hand_example() {
        // Ah = [1,2,3], S = [1,1,2]
        let text = "k = 2\nsq_accum = 0,0\ns_seq = 1,1,2\nah_seen = 1,2,3\nlambda = 0,0\n";
        let st = ClassificationState::from_text(text).unwrap();
        assert_eq!(lambda_weights(&st).unwrap(), vec![0.5, 0.5]);
        assert_eq!(st.lambda(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_ah_point_has_no_mass() {
        let ts = TrainingSet::new(vec![
            flat("a", &[0.0, 1.0, 2.0], 1.0, 1.0),
            flat("b", &[0.0, 1.0, 2.0], 2.0, 1.0),
        ])
        .unwrap();
        let mut st = ClassificationState::new(2).unwrap();
        classify_step(&mut st, &ts, 1.0, 0.0).unwrap();
        assert_eq!(lambda_weights(&st).unwrap(), vec![0.5, 0.5]);
        classify_step(&mut st, &ts, 2.0, 1.0).unwrap();
        classify_step(&mut st, &ts, 2.0, 2.0).unwrap();
        assert_eq!(st.s_seq(), &[0, 0, 1]);
        let l = lambda_weights(&st).unwrap();
        assert!((l[0] - 1.0 / 3.0).abs() < 1e-15 && (l[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn estimate_examples() {
        let ts = TrainingSet::new(vec![flat("a", &GRID, 1.0, 1.0), flat("b", &GRID, 2.0, 1.08)])
            .unwrap();
        let q = estimate_ct(&ts, &[0.25, 0.75], 30.0, 2.0).unwrap();
        assert!((q - 31.8).abs() < 1e-12);
        assert!((estimate_ct(&ts, &[0.0, 1.0], 30.0, 2.0).unwrap() - 32.4).abs() < 1e-12);
        assert!(matches!(
            estimate_ct(&ts, &[0.5, 0.5], 30.0, 9.0),
            Err(Error::OutOfRangeGrid { .. })
        ));
        assert!(estimate_ct(&ts, &[0.6, 0.6], 30.0, 2.0).is_err());
        assert!(matches!(
            estimate_ct(&ts, &[0.5, 0.5], 0.0, 2.0),
            Err(Error::NonPositiveQ0(_))
        ));

        let ones = TrainingSet::new(vec![flat("a", &GRID, 1.0, 1.0), flat("b", &GRID, 2.0, 1.0)])
            .unwrap();
        for l in [[1.0, 0.0], [0.3, 0.7]] {
            assert_eq!(estimate_ct(&ones, &l, 31.5, 2.5).unwrap(), 31.5);
        }
    }

    #[test]
    fn snapshot_roundtrip() {
        let ts = TrainingSet::new(vec![flat("a", &GRID, 1.0, 1.0), flat("b", &GRID, 2.0, 1.0)])
            .unwrap();
        let mut st = ClassificationState::new(2).unwrap();
        for (q, ah) in [(1.7, 1.0), (1.1, 1.5), (1.3, 2.75)] {
            classify_step(&mut st, &ts, q, ah).unwrap();
        }
        let back = ClassificationState::from_text(&st.to_text()).unwrap();
        assert_eq!(back, st);

        let mut resumed = back;
        classify_step(&mut resumed, &ts, 1.0, 3.0).unwrap();
        classify_step(&mut st, &ts, 1.0, 3.0).unwrap();
        assert_eq!(resumed, st);
    }
}
