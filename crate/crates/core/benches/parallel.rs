use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lattice_zeta::exec::Execution;
use lattice_zeta::lattice::{named_structure, StructureLabel};
use lattice_zeta::optimize::{minimize_fixed_volume, MinimizeConfig, Objective};
use lattice_zeta::scan::{scan_riesz_difference, RieszRange};
use lattice_zeta::zeta::{direct_sum_with, ZetaCache};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn direct_sums(c: &mut Criterion) {
    let hcp = named_structure(&StructureLabel::HCP, 1.0).unwrap();
    let mut g = c.benchmark_group("direct_sum_hcp_s6_r40");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| direct_sum_with(black_box(&hcp), 6.0, 40, exec).unwrap())
        });
    }
    g.finish();
}

fn multistart(c: &mut Criterion) {
    let obj = Objective::Riesz { s: 2.5 };
    let mut g = c.benchmark_group("multistart_riesz_8_starts");
    g.sample_size(10);
    for (name, execution) in MODES {
        let cfg = MinimizeConfig { starts: 8, execution, ..Default::default() };
        g.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| minimize_fixed_volume(&obj, 1.0, cfg).unwrap())
        });
    }
    g.finish();
}

fn riesz_scan(c: &mut Criterion) {
    let grid: Vec<f64> = RieszRange::Short.grid().into_iter().step_by(10).collect();
    let mut g = c.benchmark_group("scan_riesz_31_points");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                ZetaCache::global().clear();
                scan_riesz_difference(black_box(&grid), exec).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, direct_sums, multistart, riesz_scan);
criterion_main!(benches);
