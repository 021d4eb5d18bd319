use proptest::prelude::*;
use txshare_core::analytic::{lens_overlap_area, AnalyticParams, Model};
use txshare_core::engine::{Duration, RngStream, Scheduler, SimTime};
use txshare_core::mac::{edca_draw_backoff, AcIndex, Backoff, EdcaParams};
use txshare_core::scenario::REFERENCE_BSS;
use txshare_core::{simulate, EcdfTable, ObssLoad, ProtocolKind, ScenarioConfig, SimOptions};

proptest! {
    #[test]
    fn scheduler_pops_in_time_then_insertion_order(
        times in prop::collection::vec(0u64..1_000, 1..200),
        cancel in prop::collection::vec(any::<bool>(), 200),
    ) {
        let mut s: Scheduler<usize> = Scheduler::new();
        let handles: Vec<_> = times.iter().enumerate()
            .map(|(i, &t)| s.schedule(SimTime(t), i).unwrap())
            .collect();
        for (h, &c) in handles.iter().zip(&cancel) {
            if c { s.cancel(*h); }
        }
        let mut expected: Vec<(u64, usize)> = times.iter().copied().enumerate()
            .filter(|(i, _)| !cancel.get(*i).copied().unwrap_or(false))
            .map(|(i, t)| (t, i))
            .collect();
        expected.sort();
        let mut got = Vec::new();
        while let Some((t, i)) = s.pop_until(SimTime(u64::MAX)).unwrap() {
            got.push((t.0, i));
        }
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn frozen_backoff_never_goes_negative(
        slots in 0u32..64,
        idle_at in 0u64..1_000_000,
        busy_offsets in prop::collection::vec(0u64..2_000_000, 1..8),
    ) {
        let slot = Duration(9_000);
        let aifs = Duration(34_000);
        let mut b = Backoff::new(slots);
        let mut total = 0;
        let mut idle = SimTime(idle_at);
        for off in busy_offsets {
            let before = b.slots;
            let expiry = b.resume(idle, aifs, slot);
            prop_assert_eq!(expiry, idle + aifs + slot * u64::from(before));
            let busy = idle + Duration(off);
            let used = b.freeze(busy, slot);
            prop_assert!(used <= before);
            prop_assert_eq!(b.slots, before - used);
            total += used;
            idle = busy + Duration(100_000);
        }
        prop_assert!(total <= slots);
    }

    #[test]
    fn drawn_backoff_within_window(seed in any::<u64>(), retry in 0u32..10, ac in 0u8..4) {
        let params = EdcaParams::default();
        let cat = params.category(AcIndex::new(ac).unwrap());
        let mut rng = RngStream::new(seed, 0);
        prop_assert!(edca_draw_backoff(cat, retry, &mut rng) <= cat.cw(retry));
    }

    #[test]
    fn ecdf_is_monotone(delays in prop::collection::vec(1u64..10_000_000, 1..300)) {
        let t = EcdfTable::from_delays_ns(delays.clone()).unwrap();
        let grid = [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0];
        let ps: Vec<u64> = grid.iter().map(|&p| t.percentile(p).unwrap()).collect();
        prop_assert!(ps.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(ps[ps.len() - 1], *delays.iter().max().unwrap());
        let mut last = 0.0;
        for &x in t.values_ns() {
            let c = t.cdf_at(x);
            prop_assert!(c >= last && c <= 1.0);
            last = c;
        }
        prop_assert_eq!(last, 1.0);
    }

    #[test]
    fn lens_shrinks_with_distance(r in 0.5f64..50.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        let full = std::f64::consts::PI * r * r;
        let an = lens_overlap_area(r, near * 2.2 * r).unwrap();
        let af = lens_overlap_area(r, far * 2.2 * r).unwrap();
        prop_assert!(an >= af - 1e-9 * full);
        prop_assert!((0.0..=full * (1.0 + 1e-12)).contains(&an));
    }

    #[test]
    fn success_probability_is_a_probability(d in 0.0f64..30.0, rho in 0.0f64..=1.0, lambda in 0.0f64..0.15) {
        let params = AnalyticParams { d, lambda_a: lambda, lambda_b: lambda, ..AnalyticParams::default() }
            .with_participation(rho);
        for p in ProtocolKind::ALL {
            let s = Model::default().success_probability(p, &params).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.p_success), "{p}: {s:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_conserves_packets(seed in 1u64..10_000, preset in 0usize..18) {
        let cfg = txshare_core::scenario::scenario_matrix()[preset].clone().with_seed(seed).with_duration(1.0);
        let r = simulate(&cfg, &SimOptions::default()).unwrap();
        prop_assert!(r.invariants.is_clean(), "{:?}", r.invariants.violations());
        for (id, s) in r.nodes.iter().enumerate() {
            if cfg.node(id).is_some_and(|n| n.bss == REFERENCE_BSS) {
                prop_assert_eq!(s.generated, s.delivered + s.dropped + s.pending_at_end);
            }
        }
    }
}

#[test]
fn presets_cover_matrix() {
    let names: Vec<String> = txshare_core::scenario::scenario_matrix().into_iter().map(|c| c.name).collect();
    assert_eq!(names.len(), 18);
    assert!(names.contains(&ScenarioConfig::preset(ProtocolKind::Edca, ObssLoad::Large, AcIndex::AC3).name));
}
