use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::autograd::{grad_check, AutogradError, Params, Tape, Tensor, Var};
use crate::graph::{erdos_renyi, Graph, Permutation};
use crate::ign3::{check_equivariance2, decode_bag, enumerate_2ign_basis, lift, matrix_rank, policy_program, run_program};
use crate::layers::{
    apply_layer, apply_stack, bag_tensor, layer_forward, node_tensor, reign_stack_from_sun, reign_weights_from, sun_weights_from, Aggregation,
    BagOps, Layer, LayerKind, LayerSpec,
};
use crate::policy::{apply_policy, bag_apply_permutation, PolicyKind, SubgraphBag};
use crate::rng::{self, Prng};

use super::{HarnessError, Report, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Policies and every layer kind commute with node relabelling.
    Equivariance,
    /// Orbit-tensor policy programmes decode to the direct policies.
    PolicyPrograms,
    /// Two-layer ReIGN(2) stacks reproduce linear SUN layers.
    SunToReign,
    /// SUN stacks reproduce the baseline layers.
    BaselinesToSun,
    /// ReIGN(2) stacks reproduce the baseline layers.
    BaselinesToReign,
    /// The fifteen pooling/broadcast maps on `n x n` arrays.
    Basis2Ign,
    /// Tape gradients against central differences.
    GradCheck,
}

impl Suite {
    pub const ALL: [Suite; 7] =
        [Suite::Equivariance, Suite::PolicyPrograms, Suite::SunToReign, Suite::BaselinesToSun, Suite::BaselinesToReign, Suite::Basis2Ign, Suite::GradCheck];

    /// Command-line names; the second is a short alias.
    pub fn names(self) -> (&'static str, &'static str) {
        match self {
            Suite::Equivariance => ("equivariance", "equivariance"),
            Suite::PolicyPrograms => ("policy-programs", "lemma1"),
            Suite::SunToReign => ("sun-to-reign", "prop5"),
            Suite::BaselinesToSun => ("baselines-to-sun", "prop6"),
            Suite::BaselinesToReign => ("baselines-to-reign", "thm3"),
            Suite::Basis2Ign => ("basis2ign", "basis2ign"),
            Suite::GradCheck => ("gradcheck", "gradcheck"),
        }
    }

    /// Bound on the reported deviations unless overridden.
    pub fn default_tol(self) -> f64 {
        match self {
            Suite::Equivariance => 1e-9,
            Suite::PolicyPrograms => 0.0,
            Suite::SunToReign | Suite::BaselinesToSun | Suite::BaselinesToReign | Suite::Basis2Ign => 1e-12,
            Suite::GradCheck => 1e-5,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.names().0)
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL.into_iter().find(|x| x.names().0 == s || x.names().1 == s).ok_or_else(|| HarnessError::UnknownSuite(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Overrides [`Suite::default_tol`] for the numeric checks.
    pub tol: Option<f64>,
    /// Adds a deliberately non-equivariant layer to the equivariance suite.
    pub inject_fault: bool,
}

impl VerifyOptions {
    pub fn new(seed: u64) -> VerifyOptions {
        VerifyOptions { seed, tol: None, inject_fault: false }
    }
}

fn random_graph(r: &mut Prng, n: usize, d: usize, p: f64) -> Result<Graph> {
    let g = erdos_renyi(n, p, rng::range(r, 0, 1 << 30) as u64)?;
    let feats: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng::normal(r)).collect()).collect();
    Ok(g.with_features(&feats)?)
}

fn subgraph_policies() -> Vec<PolicyKind> {
    PolicyKind::all_with_depths(&[1, 2, 3]).into_iter().filter(|p| *p != PolicyKind::Null).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn bag_mismatch(a: &SubgraphBag, b: &SubgraphBag) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

/// Labelled layer specs covering every kind and option.
pub(crate) fn layer_zoo(d_in: usize, d_out: usize) -> Vec<(String, LayerSpec)> {
    let mut v: Vec<(String, LayerSpec)> = LayerKind::BASELINES
        .iter()
        .map(|&k| {
            let mut s = LayerSpec::new(k, d_in, d_out);
            if matches!(k, LayerKind::Gnnak | LayerKind::GnnakCtx) {
                s.inner_depth = 2;
            }
            (format!("{k:?}").to_lowercase(), s)
        })
        .collect();
    v.push(("gnnak_masked".into(), LayerSpec { masked: true, inner_depth: 2, ..LayerSpec::new(LayerKind::Gnnak, d_in, d_out) }));
    v.push(("ign2".into(), LayerSpec::ign2_full(d_in, d_out)));
    v.push(("reign2".into(), LayerSpec::reign_full(d_in, d_out)));
    let mut mean = LayerSpec::reign_full(d_in, d_out);
    for t in mean.on_terms.iter_mut().chain(mean.off_terms.iter_mut()) {
        if t.id.is_aggregated() {
            t.aggregation = Aggregation::Mean;
        }
    }
    v.push(("reign2_mean".into(), mean));
    v.push(("sun_linear".into(), LayerSpec::new(LayerKind::SunLinear, d_in, d_out)));
    v.push(("sun_expressive".into(), LayerSpec::new(LayerKind::SunExpressive, d_in, d_out)));
    v.push(("sun_expressive_mean".into(), LayerSpec { vertical: Aggregation::Mean, ..LayerSpec::new(LayerKind::SunExpressive, d_in, d_out) }));
    v
}

fn baseline_spec(kind: LayerKind, d_in: usize, d_out: usize) -> LayerSpec {
    let mut s = LayerSpec::new(kind, d_in, d_out);
    if matches!(kind, LayerKind::Gnnak | LayerKind::GnnakCtx) {
        s.inner_depth = 2;
    }
    s
}

fn equivariance(opts: &VerifyOptions, tol: f64, report: &mut Report) -> Result<()> {
    // policies: bit-exact
    let policies = PolicyKind::all_with_depths(&[1, 2, 3]);
    let mut worst = vec![0.0; policies.len()];
    for gi in 0..50 {
        let mut r = rng::child(opts.seed, "verify.policy", gi);
        let n = rng::range(&mut r, 4, 10);
        let g = random_graph(&mut r, n, 2, 0.4)?;
        for _ in 0..5 {
            let sigma = Permutation::random(n, &mut r);
            let gs = g.permute(&sigma)?;
            for (k, &kind) in policies.iter().enumerate() {
                let lhs = apply_policy(&gs, kind)?;
                let rhs = bag_apply_permutation(&apply_policy(&g, kind)?, &sigma)?;
                worst[k] += bag_mismatch(&lhs, &rhs);
            }
        }
    }
    for (kind, w) in policies.iter().zip(worst) {
        report.check_le(format!("policy.{kind}"), w, 0.0);
    }
    // layers: every kind, 20 trials of (graph, policy, permutation, weights)
    for (label, spec) in layer_zoo(3, 4) {
        // member-only pooling needs ego membership
        let pis: Vec<PolicyKind> = subgraph_policies().into_iter().filter(|p| !spec.masked || p.ego_depth().is_some()).collect();
        let mut worst: f64 = 0.0;
        for trial in 0..20u64 {
            let mut r = rng::child(opts.seed, &format!("verify.layer.{label}"), trial);
            let policy = pis[trial as usize % pis.len()];
            let n = rng::range(&mut r, 4, 7);
            let g = random_graph(&mut r, n, if policy.is_marked() { 2 } else { 3 }, 0.45)?;
            let bag = apply_policy(&g, policy)?;
            let layer = Layer::random(spec.clone(), &mut r)?;
            let sigma = Permutation::random(n, &mut r);
            let a = apply_layer(&layer, &bag_apply_permutation(&bag, &sigma)?)?;
            let b = bag_apply_permutation(&apply_layer(&layer, &bag)?, &sigma)?;
            worst = worst.max(max_diff(&a.sub_feat, &b.sub_feat));
        }
        report.check_le(format!("layer.{label}"), worst, tol);
    }
    if opts.inject_fault {
        // a DS layer followed by an offset that depends on the row index
        let faulty = |layer: &Layer, bag: &SubgraphBag| -> Result<SubgraphBag> {
            let mut out = apply_layer(layer, bag)?;
            let d = out.d;
            for (idx, v) in out.sub_feat.iter_mut().enumerate() {
                *v += 1e-3 * (idx / d) as f64;
            }
            Ok(out)
        };
        let mut r = rng::child(opts.seed, "verify.fault", 0);
        let bag = apply_policy(&random_graph(&mut r, 5, 2, 0.5)?, PolicyKind::EgoPlus(1))?;
        let layer = Layer::random(LayerSpec::new(LayerKind::Ds, bag.d, 3), &mut r)?;
        let sigma = Permutation::random(5, &mut r);
        let a = faulty(&layer, &bag_apply_permutation(&bag, &sigma)?)?;
        let b = bag_apply_permutation(&faulty(&layer, &bag)?, &sigma)?;
        report.check_le("layer.fault_fixture", max_diff(&a.sub_feat, &b.sub_feat), tol);
    }
    Ok(())
}

fn policy_programs(opts: &VerifyOptions, report: &mut Report) -> Result<()> {
    let kinds = subgraph_policies();
    let mut worst = vec![0.0; kinds.len()];
    for gi in 0..50 {
        let mut r = rng::child(opts.seed, "verify.programs", gi);
        let n = rng::range(&mut r, 2, 9);
        let d = rng::range(&mut r, 0, 3);
        let g = random_graph(&mut r, n, d, 0.35)?;
        let y0 = lift(&g);
        for (k, &kind) in kinds.iter().enumerate() {
            let y = run_program(&policy_program(kind, d)?, &y0)?;
            let decoded = decode_bag(&y, kind.feature_width(d), kind)?;
            let direct = apply_policy(&g, kind)?;
            worst[k] += bag_mismatch(&decoded, &direct) + max_diff(&decoded.sub_feat, &direct.sub_feat);
        }
    }
    for (kind, w) in kinds.iter().zip(worst) {
        report.check_le(format!("program.{kind}"), w, 0.0);
    }
    Ok(())
}

fn random_bag(r: &mut Prng, policy: PolicyKind) -> Result<SubgraphBag> {
    let n = rng::range(r, 4, 7);
    Ok(apply_policy(&random_graph(r, n, 2, 0.45)?, policy)?)
}

fn transpilers(suite: Suite, opts: &VerifyOptions, tol: f64, report: &mut Report) -> Result<()> {
    for policy in PolicyKind::all_with_depths(&[1, 2]).into_iter().filter(|p| *p != PolicyKind::Null) {
        let kinds: Vec<LayerKind> = if suite == Suite::SunToReign { vec![LayerKind::SunLinear] } else { LayerKind::BASELINES.to_vec() };
        for kind in kinds {
            let mut worst: f64 = 0.0;
            for trial in 0..10 {
                let mut r = rng::child(opts.seed, &format!("verify.{suite}.{policy}.{kind:?}"), trial);
                let bag = random_bag(&mut r, policy)?;
                let layer = Layer::random(baseline_spec(kind, bag.d, 3), &mut r)?;
                let stack = match suite {
                    Suite::SunToReign => reign_stack_from_sun(&layer)?,
                    Suite::BaselinesToSun => sun_weights_from(&layer)?,
                    _ => reign_weights_from(&layer)?,
                };
                let want = apply_layer(&layer, &bag)?.sub_feat;
                worst = worst.max(max_diff(&apply_stack(&stack, &bag)?.sub_feat, &want));
            }
            report.check_le(format!("{}.{policy}", format!("{kind:?}").to_lowercase()), worst, tol);
        }
    }
    Ok(())
}

fn basis(opts: &VerifyOptions, tol: f64, report: &mut Report) -> Result<()> {
    let n = 5;
    let ops = enumerate_2ign_basis(n)?;
    report.push("basis.count", ops.len() == 15, ops.len() as f64, 15.0);
    let mut r = rng::stream(opts.seed, "verify.basis");
    let mut worst: f64 = 0.0;
    for op in &ops {
        for _ in 0..5 {
            let y: Vec<f64> = (0..n * n).map(|_| rng::normal(&mut r)).collect();
            let sigma = Permutation::random(n, &mut r);
            worst = worst.max(check_equivariance2(|x| op.apply(x), &y, n, &sigma));
        }
    }
    report.check_le("basis.equivariance", worst, tol);
    let rows = ops.iter().map(|o| o.matrix()).collect::<std::result::Result<Vec<_>, _>>()?;
    let rank = matrix_rank(&rows);
    report.push("basis.rank", rank == 15, rank as f64, 15.0);
    Ok(())
}

/// Smallest nonzero relu input a grad-check draw may have.
const KINK_MARGIN: f64 = 1e-3;

fn grad_checks(opts: &VerifyOptions, tol: f64, report: &mut Report) -> Result<()> {
    let mut zoo = layer_zoo(2, 2);
    zoo.insert(0, ("morris".into(), LayerSpec::new(LayerKind::Morris, 2, 2)));
    for (label, spec) in zoo {
        let mut worst: f64 = 0.0;
        for s in 0..20u64 {
            let mut found = false;
            for attempt in 0..200u64 {
                let mut r = rng::child(opts.seed, &format!("verify.grad.{label}"), s * 1000 + attempt);
                let g = random_graph(&mut r, 4, 1, 0.5)?;
                let bag = apply_policy(&g, PolicyKind::EgoPlus(1))?;
                let ops = BagOps::new(&bag);
                let x0 = if spec.kind == LayerKind::Morris { node_tensor(&g.with_features(&vec![vec![1.0, 0.5]; 4])?) } else { bag_tensor(&bag) };
                let mut layer = Layer::random(spec.clone(), &mut r)?;
                // nonzero biases, so no relu input sits exactly at zero
                for t in layer.params.values_mut().filter(|t| t.shape.len() == 1) {
                    t.data.iter_mut().for_each(|b| *b = 0.5 * rng::normal(&mut r));
                }
                // scalar probe: a fixed random readout of the layer output
                let rows = x0.rows();
                let probe = Tensor::new(vec![rows, spec.d_out], (0..rows * spec.d_out).map(|_| rng::normal(&mut r)).collect())?;
                let f = |t: &mut Tape, p: &Params| -> std::result::Result<Var, AutogradError> {
                    let x = t.constant(x0.clone());
                    let y = layer_forward(t, p, "", &spec, &ops, x).map_err(|e| AutogradError::ShapeMismatch(e.to_string()))?;
                    let c = t.constant(probe.clone());
                    let yc = t.mul(y, c)?;
                    Ok(t.sum_all(yc))
                };
                let mut t = Tape::new();
                f(&mut t, &layer.params)?;
                if t.kink_margin() < KINK_MARGIN {
                    continue;
                }
                let rep = grad_check(f, &layer.params, 1e-6, tol)?;
                worst = worst.max(rep.max_rel_error);
                found = true;
                break;
            }
            if !found {
                worst = f64::INFINITY;
            }
        }
        report.check_le(format!("grad.{label}"), worst, tol);
    }
    Ok(())
}

/// Runs one suite on randomized instances derived from `opts.seed`.
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Report> {
    let started = Instant::now();
    let tol = opts.tol.unwrap_or(suite.default_tol());
    let mut cmd = vec!["verify".to_string(), suite.to_string(), format!("--seed={}", opts.seed), format!("--tol={tol:e}")];
    if opts.inject_fault {
        cmd.push("--inject-fault".into());
    }
    let mut report = Report::new(cmd);
    match suite {
        Suite::Equivariance => equivariance(opts, tol, &mut report)?,
        Suite::PolicyPrograms => policy_programs(opts, &mut report)?,
        Suite::SunToReign | Suite::BaselinesToSun | Suite::BaselinesToReign => transpilers(suite, opts, tol, &mut report)?,
        Suite::Basis2Ign => basis(opts, tol, &mut report)?,
        Suite::GradCheck => grad_checks(opts, tol, &mut report)?,
    }
    report.stamp(started);
    Ok(report)
}

pub fn cmd_verify(suite: &str, opts: &VerifyOptions) -> Result<Report> {
    run_suite(suite.parse()?, opts)
}
