use mfrb_core::diffusion::{user_activation, EXACT_LIMIT};
use mfrb_core::{evaluate_f_exact, evaluate_f_mc, CascadeSeeds, Error, FeatureModel, Graph, NodeId, ProbabilityScheme, SamplingContext};
use proptest::prelude::*;

/// Random instance with `r * m <= EXACT_LIMIT`.
fn instance() -> impl Strategy<Value = (Graph, FeatureModel, CascadeSeeds)> {
    (5usize..9, 1usize..3)
        .prop_flat_map(|(n, r)| {
            let max_m = (EXACT_LIMIT / r).min(10);
            (
                Just(n),
                Just(r),
                prop::collection::vec((0..n as NodeId, 0..n as NodeId), 1..=max_m),
                prop::collection::vec(0.05f64..0.95, r),
                prop::collection::vec(0.1f64..1.0, r),
                prop::collection::vec(prop::bool::ANY, r),
            )
        })
        .prop_map(|(n, r, edges, probs, raw_w, accept)| {
            let g = Graph::from_edges(n, &edges).unwrap().0;
            let s: f64 = raw_w.iter().sum();
            let w: Vec<f64> = raw_w.iter().map(|x| x / s).collect();
            let fm = FeatureModel::new(w, ProbabilityScheme::Constant(probs)).unwrap();
            // Rumor at user 0, accepted in the layers flagged by `accept`
            // (at least the first).
            let layers = (0..r)
                .map(|i| if i == 0 || accept[i] { vec![0] } else { vec![] })
                .collect();
            let seeds = CascadeSeeds::new(n, vec![0], layers, vec![]).unwrap();
            (g, fm, seeds)
        })
}

fn f_of(g: &Graph, fm: &FeatureModel, seeds: &CascadeSeeds, mask: u32) -> f64 {
    let users: Vec<NodeId> = (1..g.n() as NodeId).filter(|&u| mask >> u & 1 == 1).collect();
    evaluate_f_exact(g, fm, &seeds.with_positive(users).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn exact_objective_is_monotone_and_submodular((g, fm, seeds) in instance()) {
        let n = g.n();
        // Masks over users 1..n (user 0 is the rumor).
        let full = (1u32 << n) - 2;
        let mut f = std::collections::HashMap::new();
        let mut get = |m: u32| *f.entry(m).or_insert_with(|| f_of(&g, &fm, &seeds, m));
        let mut s = 0u32;
        loop {
            for u in 1..n {
                if s >> u & 1 == 1 {
                    continue;
                }
                let gain = get(s | 1 << u) - get(s);
                prop_assert!(gain >= -1e-9, "not monotone at S={s:b} u={u}");
                for v in u + 1..n {
                    if s >> v & 1 == 1 {
                        continue;
                    }
                    let later = get(s | 1 << u | 1 << v) - get(s | 1 << v);
                    prop_assert!(gain >= later - 1e-9, "not submodular at S={s:b} u={u} v={v}");
                }
            }
            if s == full {
                break;
            }
            // Next subset of `full`.
            s = (s.wrapping_sub(full)) & full;
        }
    }

    #[test]
    fn monte_carlo_agrees_with_exact((g, fm, seeds) in instance(), pick in 1u32..8) {
        let users: Vec<NodeId> = (1..g.n() as NodeId).filter(|&u| pick >> (u - 1) & 1 == 1).collect();
        let s = seeds.with_positive(users).unwrap();
        let exact = evaluate_f_exact(&g, &fm, &s).unwrap();
        let mc = evaluate_f_mc(&g, &fm, &s, 20_000, 4).unwrap();
        prop_assert!((mc.mean - exact).abs() <= 4.5 * mc.std_err + 1e-9,
            "mc {} +- {} vs exact {}", mc.mean, mc.std_err, exact);
    }

    #[test]
    fn estimator_tracks_exact((g, fm, seeds) in instance(), pick in 1u32..8) {
        let users: Vec<NodeId> = (1..g.n() as NodeId).filter(|&u| pick >> (u - 1) & 1 == 1).collect();
        let ctx = SamplingContext::new(&g, &fm, &seeds).unwrap();
        let pool = ctx.generate_pool(30_000, 6);
        let values = pool.coverage_values(&users);
        let nr = (g.n() * fm.r()) as f64;
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        let se = nr * (var / values.len() as f64).sqrt();
        let exact = evaluate_f_exact(&g, &fm, &seeds.with_positive(users).unwrap()).unwrap();
        prop_assert!((nr * mean - exact).abs() <= 4.5 * se + 1e-9, "{} +- {} vs {}", nr * mean, se, exact);
    }
}

#[test]
fn user_activation_examples() {
    let fm = FeatureModel::new(vec![0.2, 0.5, 0.3], ProbabilityScheme::Constant(vec![0.1; 3])).unwrap();
    assert!(user_activation(&fm, &[false, true, true], 0.5));
    assert!(user_activation(&fm, &[true; 3], 1.0));
    assert!(!user_activation(&fm, &[false; 3], 0.1));
}

#[test]
fn exact_oracle_guard() {
    let edges: Vec<(NodeId, NodeId)> = (0..12).map(|i| (i, i + 1)).collect();
    let g = Graph::from_edges(13, &edges).unwrap().0;
    let fm = FeatureModel::new(vec![0.5, 0.5], ProbabilityScheme::Constant(vec![0.5, 0.5])).unwrap();
    let s = CascadeSeeds::fully_active(13, 2, vec![0], vec![]).unwrap();
    assert!(matches!(evaluate_f_exact(&g, &fm, &s), Err(Error::TooLarge { size: 24, limit: 22 })));
}
