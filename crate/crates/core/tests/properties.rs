use mcre_lab::counterexample::{felsmann_exact, FelsmannParams};
use mcre_lab::law::Law;
use mcre_lab::limits::{confidence_bound, cramer_rao_floor, FisherFloorInputs};
use mcre_lab::mcre::{iterated_drift_bound, Binning, Histogram, LevelRule, PointMass, SplitSampler, TailCurve};
use mcre_lab::mcre::histogram_tv;
use mcre_lab::mixing::toy::ThresholdToy;
use mcre_lab::mixing::{alpha_finite_exact, alpha_table, sigma_composition_check, transfer_bound, BlockLaw};
use mcre_lab::process::{anchored_window, gen_environment, iterate, EnvironmentSpec, FnMap, NoisePath, StateValue};
use mcre_lab::queue::{lindley, queue_drift_coeffs, simulate_queue, transition_density, QueueKernel, QueueModel};
use mcre_lab::rng::{derive_stream, stream_id, Purpose};
use mcre_lab::stats::{integrate_to_inf, ks_two_sample};
use proptest::prelude::*;

fn prob2() -> impl Strategy<Value = [f64; 2]> {
    (0.02f64..0.98).prop_map(|p| [p, 1.0 - p])
}

fn toy() -> impl Strategy<Value = ThresholdToy> {
    (prob2(), prob2(), prob2(), prop::array::uniform4(0.0f64..1.0), 0usize..2, 0usize..2, 2usize..6).prop_map(
        |(r0, r1, init, p, x0, anchor, horizon)| ThresholdToy {
            y_transition: [r0, r1],
            y_initial: init,
            p: [[p[0], p[1]], [p[2], p[3]]],
            x0,
            anchor,
            horizon,
        },
    )
}

fn markov2() -> impl Strategy<Value = EnvironmentSpec> {
    (prob2(), prob2(), prob2()).prop_map(|(a, b, init)| EnvironmentSpec::FiniteMarkov {
        alphabet: vec![0.0, 1.0],
        transition: vec![a.to_vec(), b.to_vec()],
        initial: init.to_vec(),
    })
}

/// Two-state chain started from its stationary law.
fn stationary_markov2() -> impl Strategy<Value = EnvironmentSpec> {
    (0.05f64..0.95, 0.05f64..0.95).prop_map(|(a, b)| {
        let pi0 = b / (a + b);
        EnvironmentSpec::FiniteMarkov {
            alphabet: vec![0.0, 1.0],
            transition: vec![vec![1.0 - a, a], vec![b, 1.0 - b]],
            initial: vec![pi0, 1.0 - pi0],
        }
    })
}

fn table(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, cols), rows).prop_map(|t| {
        let s: f64 = t.iter().flatten().sum();
        t.into_iter().map(|r| r.into_iter().map(|x| x / s).collect()).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn environment_generation_is_deterministic(seed in any::<u64>(), replica in 0u64..1000, order in 1usize..4) {
        let spec = EnvironmentSpec::MovingSum { order, base: Law::Uniform { lo: 0.0, hi: 1.0 } };
        let id = stream_id(replica, Purpose::Environment);
        let a = gen_environment(&spec, -3, 40, &mut derive_stream(seed, id)).unwrap();
        let b = gen_environment(&spec, -3, 40, &mut derive_stream(seed, id)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn anchored_window_reproduces_the_tail(seed in any::<u64>(), s in 0usize..30, x0 in -5.0f64..5.0) {
        let spec = EnvironmentSpec::Iid { law: Law::Uniform { lo: -1.0, hi: 1.0 } };
        let map = FnMap::new(|x: &StateValue, y: &mcre_lab::process::EnvValue, u: f64| StateValue::scalar(0.7 * x.x() + y.value() * u));
        let env = gen_environment(&spec, 0, 40, &mut derive_stream(seed, 1)).unwrap();
        let noise = NoisePath::generate(seed, 2, 41);
        let full = iterate(&map, StateValue::scalar(x0), &env, &noise, 40).unwrap();
        let window = anchored_window(&map, full.states[s].clone(), s, &env, &noise, 40).unwrap();
        prop_assert_eq!(&window.states[..], &full.states[s..]);
    }

    #[test]
    fn nonnegative_maps_stay_nonnegative(seed in any::<u64>(), load in 0.1f64..2.0) {
        let spec = EnvironmentSpec::Iid { law: Law::Exponential { rate: 1.0 } };
        let map = FnMap::nonnegative(move |x: &StateValue, y: &mcre_lab::process::EnvValue, u: f64| {
            StateValue::scalar((x.x() + load * y.value() + u.ln()).max(0.0))
        });
        let env = gen_environment(&spec, 0, 100, &mut derive_stream(seed, 1)).unwrap();
        let tr = iterate(&map, StateValue::scalar(0.0), &env, &NoisePath::generate(seed, 2, 101), 100).unwrap();
        prop_assert!(tr.states.iter().all(|x| x.x() >= 0.0));
    }

    #[test]
    fn moving_sums_are_m_dependent(order in 1usize..3, p in 0.05f64..0.95, j in 0i64..4) {
        let spec = EnvironmentSpec::MovingSum { order, base: Law::Discrete { values: vec![0.0, 1.0], probs: vec![p, 1.0 - p] } };
        let t = alpha_table(&spec, order + 2, 1, &[j]).unwrap();
        for n in order + 1..=order + 2 {
            prop_assert!(t.sup_alpha(n).unwrap() < 1e-14, "gap {} gives {}", n, t.sup_alpha(n).unwrap());
        }
    }

    #[test]
    fn alpha_within_quarter_and_block_monotone(spec in markov2(), gap in 1usize..4, j in 0i64..4) {
        let short = alpha_table(&spec, gap, 1, &[j]).unwrap().sup_alpha(gap).unwrap();
        let long = alpha_table(&spec, gap, 3, &[j]).unwrap().sup_alpha(gap).unwrap();
        prop_assert!((0.0..=0.25).contains(&short) && (0.0..=0.25).contains(&long));
        prop_assert!(long >= short - 1e-14);
    }

    #[test]
    fn stationary_alpha_nonincreasing(spec in stationary_markov2()) {
        let curve = alpha_table(&spec, 6, 2, &[0, 1, 2, 3]).unwrap().sup_curve();
        prop_assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-14), "{:?}", curve);
    }

    #[test]
    fn alpha_of_any_table_is_bounded(t in table(3, 4)) {
        let a = alpha_finite_exact(&BlockLaw::new(t).unwrap()).unwrap();
        prop_assert!((0.0..=0.25 + 1e-15).contains(&a));
    }

    #[test]
    fn composition_with_independent_pair(t in table(2, 3), past in prob2(), future in prop::array::uniform3(0.1f64..1.0)) {
        let s: f64 = future.iter().sum();
        let future: Vec<f64> = future.iter().map(|f| f / s).collect();
        let first = BlockLaw::new(t).unwrap();
        let second = BlockLaw::product(&past, &future).unwrap();
        let (lhs, rhs) = sigma_composition_check(&first, &second).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn transfer_bound_is_sound(toy in toy()) {
        let env = toy.alpha_environment().unwrap();
        let b = toy.coupling_bound().unwrap();
        for n in 1..=toy.horizon {
            let ax = toy.alpha_response(n).unwrap();
            for r in 0..=n {
                let bound = transfer_bound(&env, &b, n, r).unwrap();
                prop_assert!(ax <= bound + 1e-12, "n={} r={} alpha={} bound={}", n, r, ax, bound);
            }
        }
    }

    #[test]
    fn regeneration_forgets_the_state(s in 0.0f64..1.6, w1 in 0.0f64..1.0, w2 in 0.0f64..1.0, u1 in 0.0f64..1.0, u2 in 0.0f64..1.0) {
        let arrival = Law::Exponential { rate: 1.0 };
        let t = 0.25;
        let regen = 0.5 * (-2.6f64).exp();
        let sampler = SplitSampler::new(QueueKernel { arrival: arrival.clone() }, PointMass(0.0), queue_drift_coeffs(&arrival, t).unwrap(), LevelRule::Fixed(t.exp_m1()), 1.0 - regen).unwrap();
        let u1 = 1.0 - regen * u1;
        let (a, ra) = sampler.split_step(s, w1, u1, u2);
        let (b, rb) = sampler.split_step(s, w2, u1, u2);
        prop_assert!(ra && rb);
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn iterated_bound_matches_expanded_sum(g in prop::collection::vec(0.0f64..2.0, 0..8), v0 in 0.0f64..10.0, kscale in 0.0f64..3.0) {
        let k: Vec<f64> = g.iter().map(|x| kscale * (1.0 + x)).collect();
        let n = g.len();
        let prod = |a: usize, b: usize| g[a..b].iter().product::<f64>();
        let expanded = v0 * prod(0, n) + (0..n).map(|r| k[r] * prod(r + 1, n)).sum::<f64>();
        let horner = iterated_drift_bound(&g, &k, v0).unwrap();
        prop_assert!((horner - expanded).abs() <= 1e-10 * (1.0 + expanded.abs()));
    }

    #[test]
    fn confidence_bound_monotone(a in 0.01f64..5.0, da in 0.01f64..1.0, s in 0.1f64..3.0, ds in 0.01f64..1.0) {
        let base = confidence_bound(a, s).unwrap();
        prop_assert!(confidence_bound(a + da, s).unwrap() <= base);
        prop_assert!(confidence_bound(a, s + ds).unwrap() >= base);
        prop_assert!((confidence_bound(2.0 * a, 2.0 * s).unwrap() - base).abs() < 1e-15);
    }

    #[test]
    fn cramer_rao_floor_is_weighted_sum(g in prop::collection::vec(0.0f64..3.0, 1..10), r in 0.1f64..5.0) {
        let n = g.len();
        let floor = cramer_rao_floor(&FisherFloorInputs { r_star: vec![r; n], g: g.clone() }).unwrap();
        prop_assert!((floor - g.iter().sum::<f64>() / r).abs() < 1e-12);
    }

    #[test]
    fn lindley_recomputes_stored_paths(seed in any::<u64>(), replica in 0u64..100) {
        let model = QueueModel::new(EnvironmentSpec::Iid { law: Law::Uniform { lo: 0.0, hi: 1.5 } }, Some(1.5), Law::Exponential { rate: 1.0 }).unwrap();
        let p = simulate_queue(&model, 200, seed, replica).unwrap();
        prop_assert_eq!(lindley(0.0, &p.s, &p.z), p.w);
    }

    #[test]
    fn waiting_times_monotone_in_service(s in prop::collection::vec(0.0f64..2.0, 50), extra in prop::collection::vec(0.0f64..1.0, 50), z in prop::collection::vec(0.0f64..3.0, 50), w0 in 0.0f64..3.0) {
        let bigger: Vec<f64> = s.iter().zip(&extra).map(|(a, b)| a + b).collect();
        let lo = lindley(w0, &s, &z);
        let hi = lindley(w0, &bigger, &z);
        prop_assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
    }

    #[test]
    fn coupled_lindley_paths_stay_together(s in prop::collection::vec(0.0f64..2.0, 60), z in prop::collection::vec(0.0f64..3.0, 60), w1 in 0.0f64..4.0, w2 in 0.0f64..4.0) {
        let (a, b) = (lindley(w1, &s, &z), lindley(w2, &s, &z));
        if let Some(t) = (0..a.len()).find(|k| a[*k] == b[*k]) {
            prop_assert!(a[t..] == b[t..]);
        }
    }

    #[test]
    fn transition_density_has_unit_mass(s in 0.0f64..2.0, w in 0.0f64..3.0, shape in 1.0f64..3.0) {
        for arrival in [Law::Exponential { rate: 1.3 }, Law::Gamma { shape, rate: 1.0 }] {
            let atom = transition_density(&arrival, s, w, 0.0).unwrap();
            let top = w + s;
            let body = if top > 0.0 {
                mcre_lab::stats::integrate(|z| transition_density(&arrival, s, w, z).unwrap(), 0.0, top, 1e-11).0
            } else {
                0.0
            };
            prop_assert!((atom + body - 1.0).abs() < 1e-7, "{:?}: {} + {}", arrival, atom, body);
        }
    }

    #[test]
    fn felsmann_recursion_matches_enumeration(g in prop::array::uniform3(0.0f64..3.0), eps in 0.0f64..0.24) {
        let p = FelsmannParams { gamma0: g[0], gamma1: g[1], gamma2: g[2], epsilon: eps };
        let s = felsmann_exact(&p, 8).unwrap();
        for n in 1..=8usize {
            let brute: f64 = (0..1u64 << (n + 1))
                .map(|bits| (1..=n).map(|k| p.gamma((((bits >> k) & 1) + ((bits >> (k - 1)) & 1)) as usize)).product::<f64>())
                .sum::<f64>()
                / (1u64 << (n + 1)) as f64;
            prop_assert!((s.a[n] - brute).abs() <= 1e-12 * (1.0 + brute));
        }
        let standard = FelsmannParams::standard(eps).unwrap();
        prop_assert!(standard.mean_gamma() < 1.0);
    }

    #[test]
    fn tail_curve_nonincreasing(taus in prop::collection::vec(prop::option::of(0usize..60), 1..200)) {
        let t = TailCurve::from_taus(&taus, 50);
        prop_assert!(t.p.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(t.p.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn histogram_tv_is_a_symmetric_distance(a in prop::collection::vec(0.0f64..5.0, 20..200), b in prop::collection::vec(0.0f64..5.0, 20..200)) {
        let bin = Binning::with_zero_atom(4.0, 10);
        let (ha, hb) = (Histogram::new(bin.clone(), &a), Histogram::new(bin, &b));
        let (ab, _) = histogram_tv(&ha, &hb).unwrap();
        let (ba, _) = histogram_tv(&hb, &ha).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-15);
        prop_assert_eq!(histogram_tv(&ha, &ha).unwrap().0, 0.0);
        let ks = ks_two_sample(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ks.statistic));
    }
}

#[test]
fn exponential_atom_matches_tail() {
    // With exp(λ) arrivals, P(W' = 0) = e^{−λ(w+s)} and the body integrates to the rest.
    let arrival = Law::Exponential { rate: 2.0 };
    let atom = transition_density(&arrival, 0.3, 0.4, 0.0).unwrap();
    assert!((atom - (-1.4f64).exp()).abs() < 1e-15);
    let tail = integrate_to_inf(|z| arrival.density(z).unwrap_or(0.0), 0.7, 1e-12).0;
    assert!((tail - atom).abs() < 1e-10);
}
