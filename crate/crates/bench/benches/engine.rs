use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use txshare_bench::{event_times, short_preset};
use txshare_core::engine::Scheduler;
use txshare_core::{simulate, ObssLoad, ProtocolKind, SimOptions, SimTime};

fn scheduler(c: &mut Criterion) {
    let times = event_times(10_000);
    c.bench_function("scheduler/schedule_pop_10k", |b| {
        b.iter(|| {
            let mut s: Scheduler<u32> = Scheduler::new();
            for (i, &t) in times.iter().enumerate() {
                s.schedule(SimTime(t), i as u32).unwrap();
            }
            let mut sum = 0u64;
            while let Some((_, e)) = s.pop_until(SimTime(u64::MAX)).unwrap() {
                sum += e as u64;
            }
            black_box(sum)
        })
    });
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_1s");
    group.sample_size(10);
    for protocol in ProtocolKind::ALL {
        let cfg = short_preset(protocol, ObssLoad::Large, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(protocol), &cfg, |b, cfg| {
            b.iter(|| simulate(cfg, &SimOptions::default()).unwrap().events)
        });
    }
    group.finish();
}

criterion_group!(benches, scheduler, simulation);
criterion_main!(benches);
