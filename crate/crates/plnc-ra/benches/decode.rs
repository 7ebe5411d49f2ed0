//! Benchmarks comparing the data-parallel experiment core against the
//! single-threaded path, plus a belief-propagation microbenchmark.
//!
//! With `--no-default-features` the `parallel` feature is off and both
//! histogram benches exercise the sequential fallback.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use plnc_ra::harness::{run_slot_histogram, SlotHistogramConfig};
use plnc_ra::ldpc;
use plnc_ra::phy::{channel_llr_single, sample_gains, synth_slot, FadingSpec};
use plnc_ra::slot::{DecoderConfig, SelectionPolicy};
use plnc_ra::{derive_rng, BitWord};
use rand::Rng;

fn histogram_cfg(threads: usize) -> SlotHistogramConfig {
    SlotHistogramConfig {
        collision: 3,
        slots: 64,
        snr_db: 15.0,
        fading: FadingSpec::Rayleigh,
        policy: SelectionPolicy::Exhaustive,
        seed: 9,
        decoder: DecoderConfig {
            max_iter: 30,
            ..Default::default()
        },
        threads,
    }
}

fn bench_histogram(c: &mut Criterion) {
    let code = ldpc::default_code();
    let mut group = c.benchmark_group("slot_histogram");
    group.sample_size(10);
    for threads in [1usize, 0] {
        let label = if threads == 1 { "serial" } else { "all-cores" };
        let cfg = histogram_cfg(threads);
        group.bench_function(label, |b| {
            b.iter(|| run_slot_histogram(&cfg, &code, None).unwrap())
        });
    }
    group.finish();
}

fn bench_bp_decode(c: &mut Criterion) {
    let code = ldpc::default_code();
    let mut rng = derive_rng(1, 0, 0, "bench");
    let power = 10f64.powf(1.0);
    c.bench_function("bp_decode_single_user", |b| {
        b.iter_batched(
            || {
                let bits: Vec<u8> = (0..code.k()).map(|_| rng.gen_range(0..2)).collect();
                let word = code.encode(&BitWord::from_bits(&bits)).unwrap();
                let gains = sample_gains(FadingSpec::Rayleigh, 1, &mut rng);
                let obs = synth_slot(&[word], &gains, &[0], power, false, &mut rng).unwrap();
                channel_llr_single(&obs.y, gains[0], power)
            },
            |llr| code.bp_decode(&llr, 30),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_histogram, bench_bp_decode);
criterion_main!(benches);
