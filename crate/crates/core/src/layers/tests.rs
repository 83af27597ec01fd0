use super::*;
use crate::autograd::grad_check;
use crate::graph::{complete, cycle, erdos_renyi, Graph, Permutation};
use crate::policy::{apply_policy, bag_apply_permutation, PolicyKind};
use crate::rng::{self, Prng};

fn random_graph(r: &mut Prng, n: usize, d: usize) -> Graph {
    let g = erdos_renyi(n, 0.45, rng::range(r, 0, 1 << 30) as u64).unwrap();
    let feats: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng::normal(r)).collect()).collect();
    g.with_features(&feats).unwrap()
}

fn policies() -> Vec<PolicyKind> {
    PolicyKind::all_with_depths(&[1, 2])
}

fn random_bag(r: &mut Prng, policy: PolicyKind) -> SubgraphBag {
    let n = rng::range(r, 4, 7);
    apply_policy(&random_graph(r, n, 2), policy).unwrap()
}

fn mv(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let (o, i) = (w.shape[0], w.shape[1]);
    (0..o).map(|r| (0..i).map(|c| w.data[r * i + c] * x[c]).sum()).collect()
}

fn acc(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

fn sum_of<'a>(d: usize, rows: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut s = vec![0.0; d];
    rows.for_each(|r| acc(&mut s, r));
    s
}

fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Loop-level baseline updates, straight from the layer equations.
fn naive(layer: &Layer, bag: &SubgraphBag) -> Vec<f64> {
    let (n, d) = (bag.n, bag.d);
    let p = |name: &str| &layer.params[name];
    let x = |k: usize, i: usize| bag.feat(k, i);
    let vert = |i: usize| sum_of(d, (0..n).map(|h| x(h, i)));
    let mut out = Vec::new();
    let ds = |w1: &Tensor, w2: &Tensor, f: &dyn Fn(usize, usize) -> Vec<f64>, k: usize, i: usize| {
        let mut v = mv(w1, &f(k, i));
        let m = (0..n).filter(|&j| bag.edge(k, i, j)).fold(vec![0.0; w1.shape[1]], |mut s, j| {
            acc(&mut s, &f(k, j));
            s
        });
        acc(&mut v, &mv(w2, &m));
        v
    };
    let xf = |k: usize, i: usize| x(k, i).to_vec();
    match layer.spec.kind {
        LayerKind::Ds | LayerKind::NgnnInner => {
            for k in 0..n {
                for i in 0..n {
                    out.push(ds(p("w1"), p("w2"), &xf, k, i));
                }
            }
        }
        LayerKind::Dss => {
            for k in 0..n {
                for i in 0..n {
                    let mut v = ds(p("w1_1"), p("w1_2"), &xf, k, i);
                    acc(&mut v, &mv(p("w2_1"), &vert(i)));
                    let mut a = vec![0.0; d];
                    for j in (0..n).filter(|&j| bag.orig_edge(i, j)) {
                        acc(&mut a, &vert(j));
                    }
                    acc(&mut v, &mv(p("w2_2"), &a));
                    out.push(v);
                }
            }
        }
        LayerKind::Idgnn => {
            for k in 0..n {
                for i in 0..n {
                    let mut v = mv(p("w1"), x(k, i));
                    let m = sum_of(d, (0..n).filter(|&j| j != k && bag.edge(k, i, j)).map(|j| x(k, j)));
                    acc(&mut v, &mv(p("w2"), &m));
                    if bag.edge(k, k, i) {
                        acc(&mut v, &mv(p("w3"), x(k, k)));
                    }
                    out.push(v);
                }
            }
        }
        LayerKind::Gnnak | LayerKind::GnnakCtx => {
            let mut h: Vec<Vec<f64>> = (0..n * n).map(|r| x(r / n, r % n).to_vec()).collect();
            for l in 0..layer.spec.inner_depth {
                let prev = h.clone();
                let f = |k: usize, i: usize| prev[k * n + i].clone();
                h = (0..n * n)
                    .map(|r| {
                        let mut v = ds(p(&format!("ds{l}.w1")), p(&format!("ds{l}.w2")), &f, r / n, r % n);
                        relu(&mut v);
                        v
                    })
                    .collect();
            }
            let o = layer.spec.d_out;
            let masked = layer.spec.masked;
            let node: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut v = h[i * n + i].clone();
                    acc(&mut v, &sum_of(o, (0..n).filter(|&j| !masked || bag.member(i, j)).map(|j| h[i * n + j].as_slice())));
                    if layer.spec.kind == LayerKind::GnnakCtx {
                        acc(&mut v, &sum_of(o, (0..n).filter(|&j| !masked || bag.member(j, i)).map(|j| h[j * n + i].as_slice())));
                    }
                    v
                })
                .collect();
            for _k in 0..n {
                out.extend(node.iter().cloned());
            }
        }
        LayerKind::SunLinear => {
            let readout = |k: usize| sum_of(d, (0..n).map(|j| x(k, j)));
            let local = |k: usize, i: usize| sum_of(d, (0..n).filter(|&j| bag.edge(k, i, j)).map(|j| x(k, j)));
            let av = |i: usize| (0..n).filter(|&j| bag.orig_edge(i, j)).fold(vec![0.0; d], |mut s, j| {
                acc(&mut s, &vert(j));
                s
            });
            for k in 0..n {
                for i in 0..n {
                    let mut v = vec![0.0; layer.spec.d_out];
                    if k == i {
                        acc(&mut v, &mv(p("u2r"), x(i, i)));
                        acc(&mut v, &mv(p("u3r"), &readout(i)));
                        acc(&mut v, &mv(p("u4r"), &local(i, i)));
                        acc(&mut v, &mv(p("u5r"), &vert(i)));
                        acc(&mut v, &mv(p("u6r"), &av(i)));
                    } else {
                        acc(&mut v, &mv(p("u0"), x(i, i)));
                        acc(&mut v, &mv(p("u1"), x(k, k)));
                        acc(&mut v, &mv(p("u2"), x(k, i)));
                        acc(&mut v, &mv(p("u3"), &readout(k)));
                        acc(&mut v, &mv(p("u4"), &local(k, i)));
                        acc(&mut v, &mv(p("u5"), &vert(i)));
                        acc(&mut v, &mv(p("u6"), &av(i)));
                    }
                    out.push(v);
                }
            }
        }
        LayerKind::Ign2 | LayerKind::Reign2 => {
            for k in 0..n {
                for i in 0..n {
                    let on = k == i;
                    let terms = if on { &layer.spec.on_terms } else { &layer.spec.off_terms };
                    let mut v = vec![0.0; layer.spec.d_out];
                    if layer.spec.bias {
                        acc(&mut v, &p(if on { "b_on" } else { "b_off" }).data);
                    }
                    for t in terms {
                        let src = naive_sources(bag, on, t.id, t.variant, k, i);
                        let mut s = sum_of(d, src.iter().map(|&(h, j)| x(h, j)));
                        if t.aggregation == Aggregation::Mean && !src.is_empty() {
                            s.iter_mut().for_each(|z| *z /= src.len() as f64);
                        }
                        acc(&mut v, &mv(p(&t.weight), &s));
                    }
                    out.push(v);
                }
            }
        }
        k => panic!("no oracle for {k:?}"),
    }
    if layer.spec.activation == Activation::Relu {
        out.iter_mut().for_each(|v| relu(v));
    }
    out.concat()
}

/// `(subgraph, node)` pairs summed by one term at target `(k, i)`.
fn naive_sources(bag: &SubgraphBag, on: bool, id: TermId, var: Option<Variant>, k: usize, i: usize) -> Vec<(usize, usize)> {
    let n = bag.n;
    let var = var.unwrap_or(Variant::Global);
    let near = |sub: usize, a: usize, b: usize| match var {
        Variant::Global => true,
        Variant::LocalSubgraph => bag.edge(sub, a, b),
        Variant::LocalOriginal => bag.orig_edge(a, b),
    };
    let global = var == Variant::Global;
    let pick = |skip: usize, sub: usize, a: usize| -> Vec<usize> {
        (0..n).filter(|&z| if global { z != skip } else { near(sub, a, z) }).collect()
    };
    let mut v = Vec::new();
    use TermId::*;
    match (on, id) {
        (true, SelfTerm) => v.push((i, i)),
        (true, On1) => v.extend((0..n).filter(|&j| near(i, i, j)).map(|j| (j, j))),
        (true, On2) => v.extend(pick(i, i, i).into_iter().map(|j| (i, j))),
        (true, On3) => v.extend(pick(i, i, i).into_iter().map(|h| (h, i))),
        (true, On4) => {
            for h in 0..n {
                for j in 0..n {
                    let ok = if global { h != j } else { near(i, i, h) && near(h, h, j) };
                    if ok {
                        v.push((h, j));
                    }
                }
            }
        }
        (false, SelfTerm) => v.push((k, i)),
        (false, Transpose) => v.push((i, k)),
        (false, RootOfSubgraph) => v.push((k, k)),
        (false, NodeAsRoot) => v.push((i, i)),
        (false, Off1) => {
            for h in 0..n {
                for j in 0..n {
                    let ok = if global { h != j } else { near(k, i, h) && near(h, i, j) };
                    if ok {
                        v.push((h, j));
                    }
                }
            }
        }
        (false, Off2) => v.extend(pick(i, k, i).into_iter().map(|h| (h, i))),
        (false, Off3) => v.extend(pick(k, k, i).into_iter().map(|j| (k, j))),
        (false, Off4) => v.extend(pick(i, k, i).into_iter().map(|h| (i, h))),
        (false, Off5) => v.extend(pick(k, k, i).into_iter().map(|h| (h, k))),
        (false, Off6) => v.extend((0..n).filter(|&j| near(k, i, j)).map(|j| (j, j))),
        _ => panic!("invalid term in oracle"),
    }
    v
}

fn run(layer: &Layer, bag: &SubgraphBag) -> Vec<f64> {
    apply_layer(layer, bag).unwrap().sub_feat
}

fn run_stack(layers: &[Layer], bag: &SubgraphBag) -> Vec<f64> {
    apply_stack(layers, bag).unwrap().sub_feat
}

fn baseline_spec(kind: LayerKind, d_in: usize, d_out: usize) -> LayerSpec {
    let mut s = LayerSpec::new(kind, d_in, d_out);
    if matches!(kind, LayerKind::Gnnak | LayerKind::GnnakCtx) {
        s.inner_depth = 2;
    }
    s
}

fn all_kinds(d_in: usize, d_out: usize) -> Vec<LayerSpec> {
    let mut v: Vec<LayerSpec> = LayerKind::BASELINES.iter().map(|&k| baseline_spec(k, d_in, d_out)).collect();
    v.push(LayerSpec::ign2_full(d_in, d_out));
    v.push(LayerSpec::reign_full(d_in, d_out));
    let mut mixed = LayerSpec::reign_full(d_in, d_out);
    for t in mixed.on_terms.iter_mut().chain(mixed.off_terms.iter_mut()).step_by(2) {
        if t.id.is_aggregated() {
            t.aggregation = Aggregation::Mean;
        }
    }
    v.push(mixed);
    v.push(LayerSpec::new(LayerKind::SunLinear, d_in, d_out));
    v.push(LayerSpec::new(LayerKind::SunExpressive, d_in, d_out));
    v.push(LayerSpec { vertical: Aggregation::Mean, ..LayerSpec::new(LayerKind::SunExpressive, d_in, d_out) });
    v
}

#[test]
fn morris_examples() {
    let one = Tensor::matrix(&[vec![2.0]]).unwrap();
    let x = Tensor::matrix(&[vec![-1.5]]).unwrap();
    let y = morris_layer(&one, &one, &[false], &x, Activation::Identity).unwrap();
    assert_eq!(y.data, vec![-3.0]);
    assert_eq!(morris_layer(&one, &one, &[false], &x, Activation::Relu).unwrap().data, vec![0.0]);

    let zero = Tensor::zeros(&[2, 2]);
    let k2 = complete(2);
    let x = Tensor::matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    let y = morris_layer(&zero, &Tensor::eye(2), k2.adjacency(), &x, Activation::Identity).unwrap();
    assert_eq!(y.data, vec![3.0, 4.0, 1.0, 2.0]);

    let c3 = cycle(3).unwrap();
    let ones = Tensor::filled(&[3, 2], 1.0);
    let y = morris_layer(&Tensor::eye(2), &Tensor::eye(2), c3.adjacency(), &ones, Activation::Relu).unwrap();
    assert_eq!(y.data, vec![3.0; 6]);
    assert!(matches!(morris_layer(&zero, &zero, &[true], &x, Activation::Relu), Err(LayerError::ShapeMismatch(_))));
}

#[test]
fn baselines_match_their_equations() {
    let mut r = rng::from_seed(11);
    for policy in policies() {
        for kind in LayerKind::BASELINES {
            for _ in 0..3 {
                let bag = random_bag(&mut r, policy);
                let layer = Layer::random(baseline_spec(kind, bag.d, 3), &mut r).unwrap();
                let diff = max_diff(&run(&layer, &bag), &naive(&layer, &bag));
                assert!(diff < 1e-12, "{kind:?} {policy}: {diff}");
            }
        }
    }
}

#[test]
fn masked_gnnak_pools_members_only() {
    let mut r = rng::from_seed(12);
    for kind in [LayerKind::Gnnak, LayerKind::GnnakCtx] {
        let bag = random_bag(&mut r, PolicyKind::Ego(1));
        let spec = LayerSpec { masked: true, ..baseline_spec(kind, bag.d, 3) };
        let layer = Layer::random(spec, &mut r).unwrap();
        assert!(max_diff(&run(&layer, &bag), &naive(&layer, &bag)) < 1e-12);
        let nm = random_bag(&mut r, PolicyKind::Nm);
        let layer = Layer::random(LayerSpec { masked: true, ..baseline_spec(kind, nm.d, 3) }, &mut r).unwrap();
        assert_eq!(apply_layer(&layer, &nm), Err(LayerError::MissingMembership));
    }
}

#[test]
fn identical_subgraphs_evolve_identically() {
    let mut r = rng::from_seed(13);
    let g = random_graph(&mut r, 6, 2);
    let bag = apply_policy(&g, PolicyKind::Null).unwrap();
    let layer = Layer::random(LayerSpec::new(LayerKind::Ds, 2, 4), &mut r).unwrap();
    let y = run(&layer, &bag);
    let block = 6 * 4;
    for k in 1..6 {
        assert_eq!(&y[k * block..(k + 1) * block], &y[..block]);
    }
}

#[test]
fn idgnn_two_node_trace() {
    let g = Graph::new(2, &[(0, 1)], &[vec![1.0], vec![10.0]]).unwrap();
    let bag = apply_policy(&g, PolicyKind::EgoPlus(1)).unwrap();
    let mut layer = Layer::zeros(LayerSpec::new(LayerKind::Idgnn, 2, 1).with_activation(Activation::Identity)).unwrap();
    // w2 reads the feature channel, w3 reads it doubled
    layer.params.insert("w2".into(), Tensor::matrix(&[vec![1.0, 0.0]]).unwrap());
    layer.params.insert("w3".into(), Tensor::matrix(&[vec![2.0, 0.0]]).unwrap());
    let y = run(&layer, &bag);
    // subgraph 0: root 0 hears node 1 through w2, node 1 hears the root through w3
    assert_eq!(y, vec![10.0, 2.0, 20.0, 1.0]);
}

#[test]
fn dss_without_cross_terms_is_ds() {
    let mut r = rng::from_seed(14);
    for policy in policies() {
        let bag = random_bag(&mut r, policy);
        let ds = Layer::random(LayerSpec::new(LayerKind::Ds, bag.d, 3), &mut r).unwrap();
        let mut dss = Layer::zeros(LayerSpec::new(LayerKind::Dss, bag.d, 3)).unwrap();
        dss.params.insert("w1_1".into(), ds.params["w1"].clone());
        dss.params.insert("w1_2".into(), ds.params["w2"].clone());
        assert_eq!(run(&dss, &bag), run(&ds, &bag));
    }
}

#[test]
fn reign_terms_match_the_expansion_table() {
    let mut r = rng::from_seed(15);
    for policy in policies() {
        for _ in 0..3 {
            let bag = random_bag(&mut r, policy);
            for mut spec in [LayerSpec::reign_full(bag.d, 2), LayerSpec::ign2_full(bag.d, 2)] {
                let layer = Layer::random(spec.clone(), &mut r).unwrap();
                assert!(max_diff(&run(&layer, &bag), &naive(&layer, &bag)) < 1e-12, "{policy}");
                for t in spec.on_terms.iter_mut().chain(spec.off_terms.iter_mut()) {
                    if t.id.is_aggregated() {
                        t.aggregation = Aggregation::Mean;
                    }
                }
                let layer = Layer { spec, params: layer.params };
                assert!(max_diff(&run(&layer, &bag), &naive(&layer, &bag)) < 1e-12, "{policy} mean");
            }
        }
    }
}

#[test]
fn single_terms_one_at_a_time() {
    let mut r = rng::from_seed(16);
    let bag = random_bag(&mut r, PolicyKind::EgoPlus(1));
    for on in [true, false] {
        let ids: &[TermId] = if on { &TermId::ON } else { &TermId::OFF };
        for &id in ids {
            let variants: Vec<Option<Variant>> = if id.is_aggregated() { Variant::ALL.iter().map(|&v| Some(v)).collect() } else { vec![None] };
            for v in variants {
                let term = ReignTerm { id, variant: v, weight: "w".into(), aggregation: Aggregation::Sum };
                let mut spec = LayerSpec::new(LayerKind::Reign2, bag.d, bag.d).with_activation(Activation::Identity);
                if on {
                    spec.on_terms.push(term);
                } else {
                    spec.off_terms.push(term);
                }
                let layer = Layer { spec, params: Params::from([("w".to_string(), Tensor::eye(bag.d))]) };
                assert!(max_diff(&run(&layer, &bag), &naive(&layer, &bag)) < 1e-12, "{id:?} {v:?}");
            }
        }
    }
}

#[test]
fn bad_terms_are_rejected() {
    let d = 2;
    let with = |on: Vec<ReignTerm>, off: Vec<ReignTerm>| LayerSpec { on_terms: on, off_terms: off, ..LayerSpec::new(LayerKind::Reign2, d, d) };
    let bad = [
        with(vec![ReignTerm::plain(TermId::Transpose, "w")], vec![]),
        with(vec![ReignTerm::plain(TermId::RootOfSubgraph, "w")], vec![]),
        with(vec![], vec![ReignTerm::agg(TermId::On2, Variant::Global, "w")]),
        with(vec![ReignTerm::plain(TermId::On2, "w")], vec![]),
        with(vec![], vec![ReignTerm::agg(TermId::SelfTerm, Variant::Global, "w")]),
    ];
    for spec in bad {
        assert!(matches!(spec.param_shapes(), Err(LayerError::BadTerm(_))), "{spec:?}");
    }
    let mut ign = LayerSpec::ign2_full(d, d);
    ign.off_terms.push(ReignTerm::agg(TermId::Off3, Variant::LocalSubgraph, "x"));
    assert!(matches!(ign.param_shapes(), Err(LayerError::NotAllowedInIGN2(_))));
    let mut ds = LayerSpec::new(LayerKind::Ds, d, d);
    ds.on_terms.push(ReignTerm::plain(TermId::SelfTerm, "w"));
    assert!(matches!(ds.param_shapes(), Err(LayerError::BadTerm(_))));
}

#[test]
fn ign2_examples() {
    let mut r = rng::from_seed(17);
    let n = 5;
    let x = Tensor { shape: vec![n * n, 2], data: (0..n * n * 2).map(|_| rng::normal(&mut r)).collect() };
    let spec = LayerSpec::ign2_full(2, 2).with_activation(Activation::Identity);
    let mut layer = Layer::zeros(spec.clone()).unwrap();
    layer.params.insert("b_on".into(), Tensor::new(vec![2], vec![0.5, -1.0]).unwrap());
    layer.params.insert("b_off".into(), Tensor::new(vec![2], vec![0.5, -1.0]).unwrap());
    let y = ign2_layer(&layer, &x).unwrap();
    assert!(y.data.chunks(2).all(|c| c == [0.5, -1.0]));

    let mut id = Layer::zeros(spec.clone()).unwrap();
    id.params.insert("on.self".into(), Tensor::eye(2));
    id.params.insert("off.self".into(), Tensor::eye(2));
    assert_eq!(ign2_layer(&id, &x).unwrap(), x);

    let mut tr = Layer::zeros(spec).unwrap();
    tr.params.insert("on.self".into(), Tensor::eye(2));
    tr.params.insert("off.transpose".into(), Tensor::eye(2));
    let y = ign2_layer(&tr, &x).unwrap();
    for k in 0..n {
        for i in 0..n {
            assert_eq!(y.row(k * n + i), x.row(i * n + k));
        }
    }
    assert!(ign2_layer(&tr, &Tensor::zeros(&[24, 2])).is_err());
}

#[test]
fn reign_examples() {
    let mut r = rng::from_seed(18);
    // the DS update through a root term and a subgraph-message term
    for _ in 0..10 {
        let policy = policies()[rng::range(&mut r, 0, policies().len() - 1)];
        let bag = random_bag(&mut r, policy);
        let d = bag.d;
        let own = ReignTerm::plain(TermId::SelfTerm, "i");
        let spec = LayerSpec {
            on_terms: vec![own.clone(), ReignTerm::agg(TermId::On2, Variant::LocalSubgraph, "i")],
            off_terms: vec![own, ReignTerm::agg(TermId::Off3, Variant::LocalSubgraph, "i")],
            ..LayerSpec::new(LayerKind::Reign2, d, d)
        };
        let reign = Layer { spec, params: Params::from([("i".to_string(), Tensor::eye(d))]) };
        let ds = Layer {
            spec: LayerSpec::new(LayerKind::Ds, d, d),
            params: Params::from([("w1".to_string(), Tensor::eye(d)), ("w2".to_string(), Tensor::eye(d))]),
        };
        assert!(max_diff(&run(&reign, &bag), &run(&ds, &bag)) < 1e-12);
    }

    // identical subgraphs: the needle term gathers the n - 1 other copies
    let g = random_graph(&mut r, 5, 2);
    let bag = apply_policy(&g, PolicyKind::Null).unwrap();
    let spec = LayerSpec {
        off_terms: vec![ReignTerm::agg(TermId::Off2, Variant::Global, "w")],
        ..LayerSpec::new(LayerKind::Reign2, 2, 2).with_activation(Activation::Identity)
    };
    let layer = Layer { spec, params: Params::from([("w".to_string(), Tensor::eye(2))]) };
    let y = run(&layer, &bag);
    for k in 0..5 {
        for i in (0..5).filter(|&i| i != k) {
            for c in 0..2 {
                assert!((y[(k * 5 + i) * 2 + c] - 4.0 * g.feature_row(i)[c]).abs() < 1e-12);
            }
        }
    }

    // no terms, only biases
    let spec = LayerSpec { bias: true, ..LayerSpec::new(LayerKind::Reign2, 2, 3).with_activation(Activation::Identity) };
    let mut layer = Layer::zeros(spec).unwrap();
    layer.params.insert("b_on".into(), Tensor::filled(&[3], 1.5));
    layer.params.insert("b_off".into(), Tensor::filled(&[3], 1.5));
    assert!(run(&layer, &bag).iter().all(|&v| v == 1.5));
}

#[test]
fn sun_examples() {
    let mut r = rng::from_seed(19);
    for policy in policies() {
        let bag = random_bag(&mut r, policy);
        let layer = Layer::random(LayerSpec::new(LayerKind::SunLinear, bag.d, 3), &mut r).unwrap();
        assert!(max_diff(&run(&layer, &bag), &naive(&layer, &bag)) < 1e-12);

        let mut id = Layer::zeros(LayerSpec::new(LayerKind::SunLinear, bag.d, bag.d).with_activation(Activation::Identity)).unwrap();
        id.params.insert("u2".into(), Tensor::eye(bag.d));
        id.params.insert("u2r".into(), Tensor::eye(bag.d));
        assert_eq!(run(&id, &bag), bag.sub_feat);
    }
    let g = random_graph(&mut r, 5, 2);
    let bag = apply_policy(&g, PolicyKind::Null).unwrap();
    let mut needle = Layer::zeros(LayerSpec::new(LayerKind::SunLinear, 2, 2).with_activation(Activation::Identity)).unwrap();
    needle.params.insert("u5".into(), Tensor::eye(2));
    needle.params.insert("u5r".into(), Tensor::eye(2));
    let y = run(&needle, &bag);
    for r in 0..25 {
        for c in 0..2 {
            assert!((y[r * 2 + c] - 5.0 * g.feature_row(r % 5)[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn every_layer_is_equivariant() {
    let mut r = rng::from_seed(20);
    for spec in all_kinds(3, 4) {
        for trial in 0..5 {
            let n = rng::range(&mut r, 4, 7);
            let policy = policies()[trial % policies().len()];
            let g = random_graph(&mut r, n, if policy.is_marked() { 2 } else { 3 });
            let bag = apply_policy(&g, policy).unwrap();
            let layer = Layer::random(spec.clone(), &mut r).unwrap();
            let sigma = Permutation::random(n, &mut r);
            let a = apply_layer(&layer, &bag_apply_permutation(&bag, &sigma).unwrap()).unwrap();
            let b = bag_apply_permutation(&apply_layer(&layer, &bag).unwrap(), &sigma).unwrap();
            let diff = max_diff(&a.sub_feat, &b.sub_feat);
            assert!(diff <= 1e-9, "{:?} {policy}: {diff}", spec.kind);
        }
    }
}

#[test]
fn sun_stacks_reproduce_baselines() {
    let mut r = rng::from_seed(21);
    for policy in policies() {
        for kind in LayerKind::BASELINES {
            for _ in 0..3 {
                let bag = random_bag(&mut r, policy);
                let layer = Layer::random(baseline_spec(kind, bag.d, 3), &mut r).unwrap();
                let want = run(&layer, &bag);
                let sun = sun_weights_from(&layer).unwrap();
                assert!(sun.iter().all(|l| l.spec.kind == LayerKind::SunLinear));
                let diff = max_diff(&run_stack(&sun, &bag), &want);
                assert!(diff <= 1e-12, "SUN {kind:?} {policy}: {diff}");
                let reign = reign_weights_from(&layer).unwrap();
                assert!(reign.iter().all(|l| l.spec.kind == LayerKind::Reign2));
                let diff = max_diff(&run_stack(&reign, &bag), &want);
                assert!(diff <= 1e-12, "ReIGN {kind:?} {policy}: {diff}");
            }
        }
    }
}

#[test]
fn stack_shapes() {
    let mut r = rng::from_seed(22);
    let layer = |k| Layer::random(baseline_spec(k, 3, 4), &mut rng::from_seed(1)).unwrap();
    assert_eq!(sun_weights_from(&layer(LayerKind::Ds)).unwrap().len(), 1);
    assert_eq!(sun_weights_from(&layer(LayerKind::Idgnn)).unwrap()[0].spec.d_out, 8);
    assert_eq!(sun_weights_from(&layer(LayerKind::Idgnn)).unwrap()[0].spec.activation, Activation::Identity);
    assert_eq!(reign_weights_from(&layer(LayerKind::Dss)).unwrap().len(), 2);
    assert_eq!(reign_weights_from(&layer(LayerKind::Gnnak)).unwrap().len(), 3);
    let masked = Layer::random(LayerSpec { masked: true, ..baseline_spec(LayerKind::Gnnak, 3, 4) }, &mut r).unwrap();
    assert!(matches!(sun_weights_from(&masked), Err(LayerError::Unsupported(_))));
    assert!(matches!(reign_weights_from(&masked), Err(LayerError::Unsupported(_))));
    let sun = Layer::random(LayerSpec::new(LayerKind::SunLinear, 3, 3), &mut r).unwrap();
    assert!(matches!(sun_weights_from(&sun), Err(LayerError::Unsupported(_))));
}

#[test]
fn reign_stack_reproduces_sun() {
    let mut r = rng::from_seed(23);
    for policy in policies() {
        for _ in 0..3 {
            let bag = random_bag(&mut r, policy);
            let sun = Layer::random(LayerSpec::new(LayerKind::SunLinear, bag.d, 3), &mut r).unwrap();
            let stack = reign_stack_from_sun(&sun).unwrap();
            let diff = max_diff(&run_stack(&stack, &bag), &run(&sun, &bag));
            assert!(diff <= 1e-12, "{policy}: {diff}");
        }
    }
    let bag = random_bag(&mut r, PolicyKind::Nm);
    let zero = Layer::zeros(LayerSpec::new(LayerKind::SunLinear, bag.d, 3)).unwrap();
    assert!(run_stack(&reign_stack_from_sun(&zero).unwrap(), &bag).iter().all(|&v| v == 0.0));
    let mut id = Layer::zeros(LayerSpec::new(LayerKind::SunLinear, bag.d, bag.d).with_activation(Activation::Identity)).unwrap();
    id.params.insert("u2".into(), Tensor::eye(bag.d));
    id.params.insert("u2r".into(), Tensor::eye(bag.d));
    assert!(max_diff(&run_stack(&reign_stack_from_sun(&id).unwrap(), &bag), &bag.sub_feat) <= 1e-12);
    let expressive = Layer::random(LayerSpec::new(LayerKind::SunExpressive, 3, 3), &mut r).unwrap();
    assert!(matches!(reign_stack_from_sun(&expressive), Err(LayerError::Unsupported(_))));
}

#[test]
fn sun_with_shared_weights_and_no_cross_terms_is_ds() {
    let mut r = rng::from_seed(24);
    for policy in policies() {
        let bag = random_bag(&mut r, policy);
        let ds = Layer::random(LayerSpec::new(LayerKind::Ds, bag.d, 3), &mut r).unwrap();
        let mut sun = Layer::zeros(LayerSpec::new(LayerKind::SunLinear, bag.d, 3)).unwrap();
        for (a, b) in [("u2", "w1"), ("u2r", "w1"), ("u4", "w2"), ("u4r", "w2")] {
            sun.params.insert(a.into(), ds.params[b].clone());
        }
        assert_eq!(run(&sun, &bag), run(&ds, &bag));
    }
}

fn kink_free(layer: &Layer, bag: &SubgraphBag) -> bool {
    // pre-activations of the layer under identity activation
    let mut lin = layer.clone();
    lin.spec.activation = Activation::Identity;
    run(&lin, bag).iter().all(|v| v.abs() > 1e-4)
}

#[test]
fn gradients_match_finite_differences() {
    let mut r = rng::from_seed(25);
    for spec in all_kinds(2, 2) {
        let mut checked = 0;
        for _ in 0..20 {
            let g = random_graph(&mut r, 4, 1);
            let bag = apply_policy(&g, PolicyKind::EgoPlus(1)).unwrap();
            let layer = Layer::random(spec.clone(), &mut r).unwrap();
            if spec.kind != LayerKind::SunExpressive && !matches!(spec.kind, LayerKind::Gnnak | LayerKind::GnnakCtx) && !kink_free(&layer, &bag) {
                continue;
            }
            let ops = BagOps::new(&bag);
            let x0 = bag_tensor(&bag);
            let f = |t: &mut Tape, p: &Params| -> std::result::Result<Var, crate::autograd::AutogradError> {
                let x = t.constant(x0.clone());
                let y = layer_forward(t, p, "", &spec, &ops, x).map_err(|e| crate::autograd::AutogradError::ShapeMismatch(e.to_string()))?;
                let sq = t.mul(y, y)?;
                Ok(t.sum_all(sq))
            };
            let rep = grad_check(f, &layer.params, 1e-6, 1e-5).unwrap();
            if rep.passed {
                checked += 1;
            } else if spec.kind != LayerKind::SunExpressive && !matches!(spec.kind, LayerKind::Gnnak | LayerKind::GnnakCtx) {
                panic!("{:?}: {rep:?}", spec.kind);
            }
        }
        assert!(checked >= 5, "{:?}: only {checked} kink-free draws passed", spec.kind);
    }
}

#[test]
fn spec_json_round_trip() {
    let spec = LayerSpec::reign_full(2, 3);
    let text = serde_json::to_string(&spec).unwrap();
    assert!(text.contains("\"#4.off\"") && text.contains("\"local_original\"") && text.contains("\"REIGN2\""));
    assert_eq!(serde_json::from_str::<LayerSpec>(&text).unwrap(), spec);
    let parsed: LayerSpec = serde_json::from_str(r#"{"kind": "SUN_EXPRESSIVE", "d_in": 2, "d_out": 4, "vertical": "mean"}"#).unwrap();
    assert_eq!(parsed.vertical, Aggregation::Mean);
    assert_eq!(parsed.activation, Activation::Relu);
}
