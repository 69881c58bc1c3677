//! Affine surrogates of the invariance condition `∂ℬ/∂x·f + sup_u ∂ℬ/∂x·g·u + α·ℬ`
//! and the per-simplex decision.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlAffine, DynamicsModel, TaylorEnclosure};
use crate::enclosure::{eval_affine_extrema, AffineEnclosure, AffineForm, IntervalMatrix};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::lbp::{propagate_jacobian_bounds, propagate_value_bounds_within, ValueBounds};
use crate::mccormick::{mccormick_product_sum, Factor};
use crate::mesh::Simplex;
use crate::network::Network;
use crate::safe_set::{SafeClass, SafeSetDef};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Lower,
    Upper,
}

/// Affine bounds with interval ranges for a list of scalar quantities on one simplex.
#[derive(Clone, Debug)]
pub struct FactorBounds {
    pub lower: Vec<AffineForm>,
    pub upper: Vec<AffineForm>,
    pub range: Vec<Interval>,
}

impl FactorBounds {
    pub fn new(lower: Vec<AffineForm>, upper: Vec<AffineForm>, range: Vec<Interval>) -> Self {
        debug_assert!(lower.len() == upper.len() && upper.len() == range.len());
        FactorBounds { lower, upper, range }
    }

    /// Entries of a `(1 × n)` or `(n × 1)` enclosure, ranges from `iv`.
    pub fn from_enclosure(enc: &AffineEnclosure, iv: &IntervalMatrix) -> Self {
        let (r, c) = enc.shape();
        let mut out = FactorBounds::new(vec![], vec![], vec![]);
        for i in 0..r {
            for j in 0..c {
                let (lo, hi) = enc.entry(i, j);
                out.lower.push(lo);
                out.upper.push(hi);
                out.range.push(iv.get(i, j));
            }
        }
        out
    }

    /// Entries `idx` of a Taylor enclosure, ranges by vertex projection.
    pub fn from_taylor(t: &TaylorEnclosure, idx: impl IntoIterator<Item = usize>, simplex: &Simplex) -> Result<Self> {
        let mut out = FactorBounds::new(vec![], vec![], vec![]);
        for k in idx {
            let lo = t.lower(k);
            let hi = t.upper(k);
            let (a, _) = eval_affine_extrema(&lo, simplex)?;
            let (_, b) = eval_affine_extrema(&hi, simplex)?;
            out.range.push(Interval::new(a, b.max(a)));
            out.lower.push(lo);
            out.upper.push(hi);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    fn factor(&self, p: usize) -> Factor<'_> {
        Factor::new(&self.lower[p], &self.upper[p], self.range[p])
    }
}

/// Bound `Σ_p J_p·f_p` with McCormick products summed in order of `p`.
pub fn drift_bound(jac: &FactorBounds, f: &FactorBounds, eta: f64, sense: Sense) -> AffineForm {
    let terms: Vec<_> = (0..jac.len()).map(|p| (jac.factor(p), f.factor(p))).collect();
    let (lo, hi) = mccormick_product_sum(&terms, eta);
    match sense {
        Sense::Lower => lo,
        Sense::Upper => hi,
    }
}

fn min_max_at_vertices(f: &AffineForm, s: &Simplex) -> (f64, f64) {
    eval_affine_extrema(f, s).expect("dimension checked")
}

/// Affine bound on `max(a, b)` from above: the dominating form if any, otherwise the
/// vertex interpolant (valid since the maximum is convex).
fn upper_of_max(a: &AffineForm, b: &AffineForm, s: &Simplex) -> AffineForm {
    let va = a.vertex_values(s).expect("dimension checked");
    let vb = b.vertex_values(s).expect("dimension checked");
    if va.iter().zip(&vb).all(|(x, y)| x >= y) {
        return a.clone();
    }
    if va.iter().zip(&vb).all(|(x, y)| x <= y) {
        return b.clone();
    }
    let forms = s.barycentric_forms().expect("simplex non-degenerate");
    let mut out = AffineForm::zeros(a.dim());
    for (k, l) in forms.iter().enumerate() {
        out.add_scaled(va[k].max(vb[k]), l);
    }
    out
}

/// Per-channel bounds `v̲_j, v̄_j` on `Σ_p J_p g_pj`.
pub fn channel_bounds(jac: &FactorBounds, g_columns: &[FactorBounds], eta: f64) -> Vec<(AffineForm, AffineForm)> {
    g_columns
        .iter()
        .map(|col| {
            let terms: Vec<_> = (0..jac.len()).map(|p| (jac.factor(p), col.factor(p))).collect();
            mccormick_product_sum(&terms, eta)
        })
        .collect()
}

/// Bound `sup_{u ∈ U} Σ_j v_j u_j` given `v̲_j ≤ v_j ≤ v̄_j`.
///
/// For each endpoint `u*` the product `v·u*` is bounded with the envelope matching the
/// sign of `u*`. The lower sense keeps per channel the candidate with the larger vertex
/// minimum.
pub fn control_bound(channels: &[(AffineForm, AffineForm)], controls: &[Interval], simplex: &Simplex, sense: Sense) -> AffineForm {
    let n = simplex.dim();
    let mut out = AffineForm::zeros(n);
    for ((vl, vu), u) in channels.iter().zip(controls) {
        let cand = |ustar: f64| -> AffineForm {
            let use_lower = (ustar >= 0.0) == (sense == Sense::Lower);
            if use_lower {
                vl.scaled(ustar)
            } else {
                vu.scaled(ustar)
            }
        };
        let (a, b) = (cand(u.lo), cand(u.hi));
        let pick = match sense {
            Sense::Lower => {
                if min_max_at_vertices(&a, simplex).0 >= min_max_at_vertices(&b, simplex).0 {
                    a
                } else {
                    b
                }
            }
            Sense::Upper => upper_of_max(&a, &b, simplex),
        };
        out.add_scaled(1.0, &pick);
    }
    out
}

/// Affine bounds of the invariance expression and of `ℬ` on one simplex.
#[derive(Clone, Debug)]
pub struct ConditionSurrogate {
    pub invar_lower: AffineForm,
    pub invar_upper: AffineForm,
    /// `(1 × 1)` enclosure of `ℬ`.
    pub value_enclosure: AffineEnclosure,
    pub alpha: f64,
}

impl ConditionSurrogate {
    pub fn value_lower(&self) -> AffineForm {
        self.value_enclosure.lower.entry(0, 0)
    }

    pub fn value_upper(&self) -> AffineForm {
        self.value_enclosure.upper.entry(0, 0)
    }
}

pub fn assemble_surrogates(
    value: &AffineEnclosure,
    drift: (&AffineForm, &AffineForm),
    control: (&AffineForm, &AffineForm),
    alpha: f64,
) -> ConditionSurrogate {
    let mut lo = drift.0.plus(control.0);
    lo.add_scaled(alpha, &value.lower.entry(0, 0));
    let mut hi = drift.1.plus(control.1);
    hi.add_scaled(alpha, &value.upper.entry(0, 0));
    ConditionSurrogate {
        invar_lower: lo,
        invar_upper: hi,
        value_enclosure: value.clone(),
        alpha,
    }
}

/// Exact quantities at a single state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEvaluation {
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub f: Vec<f64>,
    /// Row-major `n × m`.
    pub g: Vec<Vec<f64>>,
    pub drift: f64,
    pub control: f64,
    /// `∂ℬ/∂x·f + sup_u ∂ℬ/∂x·g·u + α·ℬ`.
    pub invariance: f64,
    pub in_safe_set: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `ℬ(x) ≥ 0` with `x` in the unsafe set.
    UnsafeNonnegative,
    /// `ℬ(x) ≥ 0` with `x` safe and the invariance expression negative.
    InvarianceViolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub kind: ViolationKind,
    pub simplex_id: u64,
    pub evidence: PointEvaluation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertReason {
    NegativeBarrier,
    Invariance,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decision {
    Certified(CertReason),
    Counterexample(Box<Counterexample>),
    Inconclusive,
}

/// Candidate `ℬ`, dynamics, safe set and decision parameters.
#[derive(Clone, Copy, Debug)]
pub struct Problem<'a, D: ControlAffine> {
    pub net: &'a Network,
    pub model: &'a DynamicsModel<D>,
    pub safe: &'a SafeSetDef,
    pub eta: f64,
    pub alpha: f64,
    /// Margin for the strict comparison `ℬ̄ < 0`.
    pub epsilon_strict: f64,
    /// Widening applied to every affine bound.
    pub epsilon_fp: f64,
}

impl<'a, D: ControlAffine> Problem<'a, D> {
    pub fn new(net: &'a Network, model: &'a DynamicsModel<D>, safe: &'a SafeSetDef) -> Result<Self> {
        let n = model.state_dim();
        if net.input_dim() != n {
            return Err(Error::dims("network input vs state", n, net.input_dim()));
        }
        if net.output_dim() != 1 {
            return Err(Error::dims("network output", 1, net.output_dim()));
        }
        if safe.dim() != n {
            return Err(Error::dims("safe set vs state", n, safe.dim()));
        }
        Ok(Problem {
            net,
            model,
            safe,
            eta: 0.5,
            alpha: 1.0,
            epsilon_strict: 0.0,
            epsilon_fp: 0.0,
        })
    }

    /// Evaluate everything exactly at `x`.
    pub fn evaluate_point(&self, x: &[f64]) -> Result<PointEvaluation> {
        let value = self.net.value(x)?;
        let gradient = self.net.gradient(x)?;
        let f = self.model.eval_f(x)?;
        let g = self.model.eval_g(x)?;
        let drift: f64 = gradient.iter().zip(&f).map(|(a, b)| a * b).sum();
        let mut control = 0.0;
        for (j, u) in self.model.control_bounds().iter().enumerate() {
            let v: f64 = gradient.iter().enumerate().map(|(p, gp)| gp * g[[p, j]]).sum();
            control += (v * u.lo).max(v * u.hi);
        }
        Ok(PointEvaluation {
            point: x.to_vec(),
            value,
            gradient,
            f,
            g: g.rows().into_iter().map(|r| r.to_vec()).collect(),
            drift,
            control,
            invariance: drift + control + self.alpha * value,
            in_safe_set: self.safe.contains(x),
        })
    }

    /// The violated part of the CBF condition at `x`, if any.
    pub fn violation_at(&self, x: &[f64]) -> Result<Option<(ViolationKind, PointEvaluation)>> {
        let e = self.evaluate_point(x)?;
        if e.value < 0.0 || !self.safe.state_box.contains(x) {
            return Ok(None);
        }
        let kind = if !e.in_safe_set {
            ViolationKind::UnsafeNonnegative
        } else if e.invariance < 0.0 {
            ViolationKind::InvarianceViolated
        } else {
            return Ok(None);
        };
        Ok(Some((kind, e)))
    }

    pub fn value_bounds(&self, simplex: &Simplex) -> Result<ValueBounds> {
        self.value_bounds_within(simplex, None)
    }

    /// Value bounds tightened by those of a simplex containing `simplex`.
    pub fn value_bounds_within(&self, simplex: &Simplex, parent: Option<&ValueBounds>) -> Result<ValueBounds> {
        let mut vb = propagate_value_bounds_within(self.net, simplex, parent)?;
        vb.output = vb.output.widened(self.epsilon_fp);
        Ok(vb)
    }

    /// Full surrogate on `simplex`, reusing `vb` from [`Self::value_bounds`].
    pub fn surrogate(&self, simplex: &Simplex, vb: &ValueBounds) -> Result<ConditionSurrogate> {
        let n = simplex.dim();
        let jac = propagate_jacobian_bounds(self.net, &vb.layers, simplex, self.eta)?
            .bounds
            .widened(self.epsilon_fp);
        let jac_iv = jac.interval_over(simplex);
        let jf = FactorBounds::from_enclosure(&jac, &jac_iv);
        let (fe, ge) = self.model.taylor_enclosures(simplex)?;
        let ff = FactorBounds::from_taylor(&fe, 0..n, simplex)?;
        let m = self.model.control_dim();
        let gcols = (0..m)
            .map(|j| FactorBounds::from_taylor(&ge, (0..n).map(|p| p * m + j), simplex))
            .collect::<Result<Vec<_>>>()?;
        let drift_lo = drift_bound(&jf, &ff, self.eta, Sense::Lower);
        let drift_hi = drift_bound(&jf, &ff, self.eta, Sense::Upper);
        let channels = channel_bounds(&jf, &gcols, self.eta);
        let u = self.model.control_bounds();
        let ctrl_lo = control_bound(&channels, u, simplex, Sense::Lower);
        let ctrl_hi = control_bound(&channels, u, simplex, Sense::Upper);
        Ok(assemble_surrogates(&vb.output, (&drift_lo, &drift_hi), (&ctrl_lo, &ctrl_hi), self.alpha))
    }

    fn barrier_negative(&self, value_upper: &AffineForm, simplex: &Simplex) -> bool {
        min_max_at_vertices(value_upper, simplex).1 < -self.epsilon_strict
    }

    fn probe(&self, simplex: &Simplex, hit: impl Fn(&[f64]) -> bool) -> Result<Option<Counterexample>> {
        let mut pts = simplex.vertex_rows();
        pts.push(simplex.barycenter());
        for x in pts {
            if !hit(&x) {
                continue;
            }
            if let Some((kind, evidence)) = self.violation_at(&x)? {
                return Ok(Some(Counterexample {
                    kind,
                    simplex_id: simplex.id,
                    evidence,
                }));
            }
        }
        Ok(None)
    }

    /// Decide a simplex from its full surrogate.
    pub fn decide_simplex(&self, sur: &ConditionSurrogate, simplex: &Simplex, class: SafeClass) -> Result<Decision> {
        let vl = sur.value_lower();
        let vu = sur.value_upper();
        if self.barrier_negative(&vu, simplex) {
            return Ok(Decision::Certified(CertReason::NegativeBarrier));
        }
        match class {
            SafeClass::Straddle => Ok(Decision::Inconclusive),
            SafeClass::Outside => self.decide_outside(&vl, simplex),
            SafeClass::Inside => {
                if min_max_at_vertices(&sur.invar_lower, simplex).0 >= 0.0 {
                    return Ok(Decision::Certified(CertReason::Invariance));
                }
                let cex = self.probe(simplex, |x| vl.eval(x) >= 0.0 && sur.invar_upper.eval(x) < 0.0)?;
                Ok(cex.map_or(Decision::Inconclusive, |c| Decision::Counterexample(Box::new(c))))
            }
        }
    }

    fn decide_outside(&self, vl: &AffineForm, simplex: &Simplex) -> Result<Decision> {
        let cex = self.probe(simplex, |x| vl.eval(x) >= 0.0)?;
        Ok(cex.map_or(Decision::Inconclusive, |c| Decision::Counterexample(Box::new(c))))
    }

    /// Same result as [`Self::decide_simplex`], computing Jacobian and dynamics
    /// bounds only when the invariance branch is reached.
    pub fn decide(&self, simplex: &Simplex, class: SafeClass) -> Result<Decision> {
        self.decide_within(simplex, class, None).map(|(d, _)| d)
    }

    /// [`Self::decide`] with value bounds inherited from a containing simplex; also
    /// returns the value bounds used.
    pub fn decide_within(&self, simplex: &Simplex, class: SafeClass, parent: Option<&ValueBounds>) -> Result<(Decision, ValueBounds)> {
        let vb = self.value_bounds_within(simplex, parent)?;
        let vu = vb.output.upper.entry(0, 0);
        if self.barrier_negative(&vu, simplex) {
            return Ok((Decision::Certified(CertReason::NegativeBarrier), vb));
        }
        let d = match class {
            SafeClass::Straddle => Decision::Inconclusive,
            SafeClass::Outside => self.decide_outside(&vb.output.lower.entry(0, 0), simplex)?,
            SafeClass::Inside => {
                let sur = self.surrogate(simplex, &vb)?;
                self.decide_simplex(&sur, simplex, class)?
            }
        };
        Ok((d, vb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::builtin_system;
    use crate::enclosure::AffineTensor;
    use std::collections::BTreeMap;

    fn seg(a: f64, b: f64) -> Simplex {
        Simplex::from_rows(&[vec![a], vec![b]]).unwrap()
    }

    fn exact1(f: AffineForm) -> FactorBounds {
        let r = Interval::point(f.offset);
        FactorBounds::new(vec![f.clone()], vec![f], vec![r])
    }

    #[test]
    fn exact_factors_give_exact_drift() {
        let s = seg(-1.0, 1.0);
        let jac = exact1(AffineForm::constant(1, 1.0));
        let f = AffineForm::new(vec![-1.0], 0.0);
        let fb = FactorBounds::new(vec![f.clone()], vec![f.clone()], vec![Interval::new(-1.0, 1.0)]);
        assert_eq!(drift_bound(&jac, &fb, 0.5, Sense::Lower), f);
        assert_eq!(drift_bound(&jac, &fb, 0.5, Sense::Upper), f);
        let zero = exact1(AffineForm::zeros(1));
        let d = drift_bound(&zero, &fb, 0.5, Sense::Lower);
        assert_eq!(d.eval(&[0.3]), 0.0);
        let _ = s;
    }

    #[test]
    fn control_bound_exact_constant() {
        let s = seg(0.0, 1.0);
        let v0 = -0.7;
        let v = AffineForm::constant(1, v0);
        let lo = control_bound(&[(v.clone(), v.clone())], &[Interval::new(-1.0, 1.0)], &s, Sense::Lower);
        assert_eq!(lo.eval(&[0.5]), v0.abs());
        let none = control_bound(&[], &[], &s, Sense::Lower);
        assert_eq!(none, AffineForm::zeros(1));
    }

    #[test]
    fn sign_correct_candidate_selection() {
        // v ∈ [−2, −1], u ∈ [−1, 1]: inf over v of sup over u is 1
        let s = seg(0.0, 1.0);
        let ch = (AffineForm::constant(1, -2.0), AffineForm::constant(1, -1.0));
        let lo = control_bound(std::slice::from_ref(&ch), &[Interval::new(-1.0, 1.0)], &s, Sense::Lower);
        assert_eq!(lo.eval(&[0.5]), 1.0);
        let hi = control_bound(&[ch], &[Interval::new(-1.0, 1.0)], &s, Sense::Upper);
        assert_eq!(hi.eval(&[0.5]), 2.0);
    }

    #[test]
    fn upper_control_uses_interpolant_of_crossing_candidates() {
        let s = seg(-1.0, 1.0);
        let v = AffineForm::new(vec![1.0], 0.0);
        let hi = control_bound(&[(v.clone(), v)], &[Interval::new(-1.0, 1.0)], &s, Sense::Upper);
        // sup_u x·u = |x| ≤ 1 on [−1, 1]
        assert!((hi.eval(&[0.0]) - 1.0).abs() < 1e-12);
        assert!((hi.eval(&[1.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assembly_of_constant_parts() {
        let c = 0.4;
        let value = AffineEnclosure::exact(AffineTensor::constant(ndarray::array![[c]], 1));
        let z = AffineForm::zeros(1);
        let s1 = assemble_surrogates(&value, (&z, &z), (&z, &z), 1.0);
        assert_eq!((s1.invar_lower.eval(&[0.0]), s1.invar_upper.eval(&[0.0])), (c, c));
        let s2 = assemble_surrogates(&value, (&z, &z), (&z, &z), 2.0);
        assert_eq!(s2.invar_lower.offset, 2.0 * s1.invar_lower.offset);
    }

    fn constant_net(b: f64) -> Network {
        Network::from_json_str(&format!(
            r#"{{"input_dim":1,"layers":[{{"rows":1,"cols":1,"weight":[[0.0]],"bias":[{b}],"activation":"identity"}}]}}"#
        ))
        .unwrap()
    }

    #[test]
    fn outside_decisions() {
        let model = builtin_system("contraction1d", &BTreeMap::new()).unwrap();
        let safe = model.system().default_safe_set();
        let neg = constant_net(-0.1);
        let p = Problem::new(&neg, &model, &safe).unwrap();
        let s = seg(-2.0, -1.5);
        assert_eq!(p.decide(&s, SafeClass::Outside).unwrap(), Decision::Certified(CertReason::NegativeBarrier));
        let pos = constant_net(1.0);
        let p = Problem::new(&pos, &model, &safe).unwrap();
        match p.decide(&s, SafeClass::Outside).unwrap() {
            Decision::Counterexample(c) => {
                assert_eq!(c.kind, ViolationKind::UnsafeNonnegative);
                assert!(c.evidence.value >= 0.0 && !c.evidence.in_safe_set);
            }
            d => panic!("expected counterexample, got {d:?}"),
        }
        assert_eq!(p.decide(&seg(-1.2, -0.8), SafeClass::Straddle).unwrap(), Decision::Inconclusive);
    }

    #[test]
    fn inside_certified_by_invariance() {
        // ℬ ≡ 1 has zero gradient, so the invariance expression is α·1 > 0
        let model = builtin_system("contraction1d", &BTreeMap::new()).unwrap();
        let safe = model.system().default_safe_set();
        let net = constant_net(1.0);
        let p = Problem::new(&net, &model, &safe).unwrap();
        let s = seg(-0.5, 0.5);
        assert_eq!(p.decide(&s, SafeClass::Inside).unwrap(), Decision::Certified(CertReason::Invariance));
    }
}
