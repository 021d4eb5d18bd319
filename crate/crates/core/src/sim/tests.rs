use super::*;
use crate::mac::AcIndex;
use crate::scenario::{scenario_matrix, NodeSpec, ObssLoad, TrafficBinding, TrafficSource};

fn short(cfg: ScenarioConfig, secs: f64) -> ScenarioConfig {
    cfg.with_duration(secs)
}

fn run(cfg: &ScenarioConfig) -> SimResult {
    simulate(cfg, &SimOptions { trace: true }).expect("simulation runs")
}

/// Reference BSS only: AP1 plus its four STAs, no overlapping traffic.
fn isolated(protocol: ProtocolKind) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(protocol, ObssLoad::Light, AcIndex::AC3);
    cfg.nodes.retain(|n| n.bss == REFERENCE_BSS);
    cfg.traffic.retain(|b| b.node < cfg.nodes.len());
    cfg.name = format!("{}-isolated", protocol);
    cfg
}

#[test]
fn lone_sta_sees_contention_free_delay() {
    let mut cfg = isolated(ProtocolKind::Edca);
    cfg.traffic.retain(|b| b.node == 1);
    let cfg = short(cfg, 1.0);
    let r = run(&cfg);
    let table = r.delays.ecdf().unwrap();
    assert_eq!(r.nodes[1].generated, r.nodes[1].delivered);
    assert_eq!(table.drop_count(), 0);
    // AIFS + k slots + data + SIFS + ack, k in 0..=3
    let base = 34_000 + 80_800 + 16_000 + 32_000;
    for &v in table.values_ns() {
        let extra = v - base;
        assert!(extra % 9_000 == 0 && extra <= 27_000, "{v}");
    }
    assert!(r.invariants.is_clean());
}

#[test]
fn same_seed_same_trace() {
    let cfg = short(
        ScenarioConfig::preset(ProtocolKind::SharingBased, ObssLoad::Medium, AcIndex::AC0),
        1.0,
    );
    let a = run(&cfg);
    let b = run(&cfg);
    assert_eq!(a.trace, b.trace);
    let c = run(&cfg.clone().with_seed(cfg.seed + 1));
    assert_ne!(a.trace, c.trace);
}

#[test]
fn every_preset_conserves_packets_and_invariants() {
    for cfg in scenario_matrix() {
        let cfg = short(cfg, 1.5);
        let r = run(&cfg);
        assert!(r.invariants.is_clean(), "{}: {:?}", cfg.name, r.invariants.violations());
        for (id, s) in r.nodes.iter().enumerate() {
            if cfg.node(id).is_some_and(|n| n.bss == REFERENCE_BSS) {
                assert_eq!(
                    s.generated,
                    s.delivered + s.dropped + s.pending_at_end,
                    "{} node {id}",
                    cfg.name
                );
            }
        }
        let samples = r.delays.sample_count() as u64;
        let delivered: u64 = cfg.reference_stas().iter().map(|&s| r.nodes[s].delivered).sum();
        assert_eq!(samples, delivered, "{}", cfg.name);
        assert!(delivered > 0, "{}", cfg.name);
    }
}

#[test]
fn trigger_cycles_on_time_without_obss() {
    let cfg = short(isolated(ProtocolKind::TriggerBased), 2.0);
    let r = run(&cfg);
    let t = r.trigger.unwrap();
    assert!(t.started >= 399, "{t:?}");
    assert_eq!(t.postponed, 0, "{t:?}");
    assert_eq!(t.failed_attempts, 0);
    let stas = cfg.reference_stas();
    let delivered: u64 = stas.iter().map(|&s| r.nodes[s].delivered).sum();
    let generated: u64 = stas.iter().map(|&s| r.nodes[s].generated).sum();
    assert!(delivered + 8 >= generated, "{delivered}/{generated}");
    assert!(r.invariants.is_clean());
}

#[test]
fn shared_txop_serves_the_group() {
    let cfg = short(isolated(ProtocolKind::SharingBased), 1.0);
    let r = run(&cfg);
    let trace = r.trace.as_ref().unwrap();
    let polls = trace
        .iter()
        .filter(|t| t.kind == "tx_start" && t.get("frame") == Some("cts_share") && t.get("poll").is_some())
        .count();
    assert!(polls > 100, "{polls}");
    let rejects = trace
        .iter()
        .filter(|t| t.kind == "tx_start" && t.get("frame") == Some("cts_reject"))
        .count();
    assert!(rejects > 0);
    assert!(r.invariants.is_clean(), "{:?}", r.invariants.violations());
    let stas = cfg.reference_stas();
    let delivered: u64 = stas.iter().map(|&s| r.nodes[s].delivered).sum();
    let generated: u64 = stas.iter().map(|&s| r.nodes[s].generated).sum();
    assert!(delivered + 8 >= generated);
}

#[test]
fn hidden_pair_collides() {
    // Two STAs that cannot hear each other, both sending to one AP.
    let mut cfg = isolated(ProtocolKind::Edca);
    cfg.nodes = vec![
        NodeSpec::new(0, 1, Role::Ap, 0.0, 0.0, AcIndex::AC3),
        NodeSpec::new(1, 1, Role::Sta, 8.0, 0.0, AcIndex::AC3),
        NodeSpec::new(2, 1, Role::Sta, -8.0, 0.0, AcIndex::AC3),
    ];
    cfg.traffic = vec![
        TrafficBinding { node: 1, source: TrafficSource::saturated(1400, Direction::Uplink) },
        TrafficBinding { node: 2, source: TrafficSource::saturated(1400, Direction::Uplink) },
    ];
    let cfg = short(cfg, 1.0);
    let r = run(&cfg);
    let trace = r.trace.unwrap();
    let collided = trace
        .iter()
        .filter(|t| t.kind == "rx" && t.node == 0 && t.get("outcome") == Some("collided"))
        .count();
    assert!(collided > 50, "{collided}");
}
