use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AutogradError, Params, Result, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub passed: bool,
}

fn eval<F>(f: &F, params: &Params) -> Result<f64>
where
    F: Fn(&mut Tape, &Params) -> Result<Var>,
{
    let mut t = Tape::new();
    let l = f(&mut t, params)?;
    let v = t.value(l);
    if v.len() != 1 {
        return Err(AutogradError::NotScalar(v.shape.clone()));
    }
    Ok(v.item())
}

/// Compares tape gradients with central differences of step `step` on every
/// coordinate. Relative error is `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn grad_check<F>(f: F, params: &Params, step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &Params) -> Result<Var>,
{
    let mut t = Tape::new();
    let loss = f(&mut t, params)?;
    let analytic = t.backward(loss)?;
    let mut probe = params.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, worst: None, passed: true };
    for (name, value) in params {
        for idx in 0..value.len() {
            let x = value.data[idx];
            probe.get_mut(name).expect("cloned").data[idx] = x + step;
            let up = eval(&f, &probe)?;
            probe.get_mut(name).expect("cloned").data[idx] = x - step;
            let down = eval(&f, &probe)?;
            probe.get_mut(name).expect("cloned").data[idx] = x;
            let fd = (up - down) / (2.0 * step);
            let a = analytic.get(name).map_or(0.0, |g| g.data[idx]);
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), idx));
            }
        }
    }
    report.passed = report.max_rel_error <= tol;
    Ok(report)
}

fn check_grad_shape(name: &str, p: &Tensor, g: &Tensor) -> Result<()> {
    if p.shape != g.shape {
        return Err(AutogradError::ShapeMismatch(format!("gradient for {name}: {:?} vs {:?}", g.shape, p.shape)));
    }
    Ok(())
}

/// `θ ← θ - lr·g` for every parameter with a gradient.
pub fn sgd_step(params: &mut Params, grads: &Params, lr: f64) -> Result<()> {
    for (name, g) in grads {
        let p = params.get_mut(name).ok_or_else(|| AutogradError::UnknownParam(name.clone()))?;
        check_grad_shape(name, p, g)?;
        p.data.iter_mut().zip(&g.data).for_each(|(x, d)| *x -= lr * d);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: Params,
    pub v: Params,
    pub t: u64,
}

/// One bias-corrected Adam update. Parameters without a gradient are left
/// alone and their moments untouched.
pub fn adam_step(state: &mut AdamState, params: &mut Params, grads: &Params, lr: f64, cfg: &AdamConfig) -> Result<()> {
    for (name, g) in grads {
        let p = params.get(name).ok_or_else(|| AutogradError::UnknownParam(name.clone()))?;
        check_grad_shape(name, p, g)?;
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (name, g) in grads {
        let p = params.get_mut(name).expect("checked above");
        let m = state.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(&g.shape));
        let v = state.v.entry(name.clone()).or_insert_with(|| Tensor::zeros(&g.shape));
        for i in 0..g.len() {
            let gi = g.data[i];
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            let mh = m.data[i] / bc1;
            let vh = v.data[i] / bc2;
            p.data[i] -= lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Checkpoint format: `{"name": {"shape": [...], "values": [...]}, ...}`.
pub fn params_to_json(params: &Params) -> String {
    serde_json::to_string(params).expect("parameters serialize")
}

pub fn params_from_json(text: &str) -> Result<Params> {
    let params: Params = serde_json::from_str(text).map_err(|e| AutogradError::Checkpoint(e.to_string()))?;
    for (name, t) in &params {
        if t.shape.iter().product::<usize>() != t.len() {
            return Err(AutogradError::Checkpoint(format!("{name}: {} values for shape {:?}", t.len(), t.shape)));
        }
    }
    Ok(params)
}

pub fn save_params(path: &Path, params: &Params) -> Result<()> {
    fs::write(path, params_to_json(params)).map_err(|e| AutogradError::Io(e.to_string()))
}

pub fn load_params(path: &Path) -> Result<Params> {
    params_from_json(&fs::read_to_string(path).map_err(|e| AutogradError::Io(e.to_string()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn one(name: &str, v: f64) -> Params {
        Params::from([(name.to_string(), Tensor::new(vec![1], vec![v]).unwrap())])
    }

    #[test]
    fn sgd() {
        let mut p = one("x", 1.0);
        sgd_step(&mut p, &one("x", 2.0), 0.1).unwrap();
        assert!((p["x"].data[0] - 0.8).abs() < 1e-15);
        sgd_step(&mut p, &one("x", 0.0), 0.1).unwrap();
        assert!((p["x"].data[0] - 0.8).abs() < 1e-15);
        assert!(matches!(sgd_step(&mut p, &one("y", 1.0), 0.1), Err(AutogradError::UnknownParam(_))));
    }

    #[test]
    fn adam_first_step() {
        let mut p = Params::from([("x".to_string(), Tensor::filled(&[3], 0.5))]);
        let mut s = AdamState::default();
        let cfg = AdamConfig::default();
        adam_step(&mut s, &mut p, &Params::from([("x".to_string(), Tensor::filled(&[3], 1.0))]), 1e-3, &cfg).unwrap();
        for &x in &p["x"].data {
            assert!((x - (0.5 - 1e-3 / (1.0 + 1e-8))).abs() < 1e-15);
        }
        let before = p.clone();
        adam_step(&mut s, &mut p, &Params::from([("x".to_string(), Tensor::filled(&[3], 0.0))]), 1e-3, &cfg).unwrap();
        // momentum keeps moving; a fresh state with zero gradient does not
        assert_ne!(p, before);
        let mut fresh = AdamState::default();
        let mut q = before.clone();
        adam_step(&mut fresh, &mut q, &Params::from([("x".to_string(), Tensor::filled(&[3], 0.0))]), 1e-3, &cfg).unwrap();
        assert_eq!(q, before);
        let bad = Params::from([("x".to_string(), Tensor::filled(&[2], 0.0))]);
        assert!(matches!(adam_step(&mut s, &mut p, &bad, 1e-3, &cfg), Err(AutogradError::ShapeMismatch(_))));
    }

    #[test]
    fn grad_check_basics() {
        let zero = |t: &mut Tape, p: &Params| {
            let x = t.param_from(p, "x")?;
            let z = t.scale(x, 0.0);
            Ok(t.sum_all(z))
        };
        let p = Params::from([("x".to_string(), Tensor::new(vec![3], vec![0.3, -1.0, 2.0]).unwrap())]);
        let rep = grad_check(zero, &p, 1e-6, 1e-9).unwrap();
        assert!(rep.passed && rep.max_rel_error == 0.0);
        let quad = |t: &mut Tape, p: &Params| {
            let x = t.param_from(p, "x")?;
            let s = t.mul(x, x)?;
            Ok(t.sum_all(s))
        };
        let rep = grad_check(quad, &p, 1e-6, 1e-8).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn two_layer_mlp_gradients() {
        for seed in 0..5 {
            let mut r = rng::from_seed(seed);
            let mut mk = |s: &[usize]| {
                Tensor::new(s.to_vec(), (0..s.iter().product()).map(|_| rng::normal(&mut r)).collect()).unwrap()
            };
            let x = mk(&[6, 4]);
            let params = Params::from([
                ("w1".to_string(), mk(&[5, 4])),
                ("b1".to_string(), mk(&[5])),
                ("w2".to_string(), mk(&[3, 5])),
                ("b2".to_string(), mk(&[3])),
            ]);
            let f = |t: &mut Tape, p: &Params| {
                let xv = t.constant(x.clone());
                let (w1, b1) = (t.param_from(p, "w1")?, t.param_from(p, "b1")?);
                let (w2, b2) = (t.param_from(p, "w2")?, t.param_from(p, "b2")?);
                let h = t.linear(xv, w1, Some(b1))?;
                let h = t.relu(h);
                let y = t.linear(h, w2, Some(b2))?;
                let y2 = t.mul(y, y)?;
                Ok(t.sum_all(y2))
            };
            // skip draws with a preactivation near the kink
            let mut t = Tape::new();
            let xv = t.constant(x.clone());
            let w1 = t.constant(params["w1"].clone());
            let b1 = t.constant(params["b1"].clone());
            let h = t.linear(xv, w1, Some(b1)).unwrap();
            if t.value(h).data.iter().any(|v| v.abs() < 1e-3) {
                continue;
            }
            let rep = grad_check(f, &params, 1e-6, 1e-6).unwrap();
            assert!(rep.passed, "{rep:?}");
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        let p = Params::from([
            ("a.w".to_string(), Tensor::new(vec![2, 2], vec![0.1, 1.0 / 3.0, -2.5e-300, 7.0]).unwrap()),
            ("b".to_string(), Tensor::scalar(1.5)),
        ]);
        save_params(&path, &p).unwrap();
        assert_eq!(load_params(&path).unwrap(), p);
        assert!(params_to_json(&p).contains("\"shape\":[2,2]"));
        assert!(matches!(params_from_json(r#"{"x": {"shape": [2], "values": [1.0]}}"#), Err(AutogradError::Checkpoint(_))));
    }
}
