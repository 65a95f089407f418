use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use swarm_avatar::apf::ApfParams;
use swarm_avatar::assignment::optimal_assign_with;
use swarm_avatar::lstm::{batch_gradients_with, LstmModel, FEATURES};
use swarm_avatar::pose::SkeletonConfig;
use swarm_avatar::sim::{grid_start, run_scenario_with, GridStart, SimConfig};
use swarm_avatar::synthetic::{generate_synthetic_dataset, t_pose};
use swarm_avatar::{Emotion, Execution};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn assignment(c: &mut Criterion) {
    let skel = SkeletonConfig::default();
    let form = skel.build(&t_pose(0.0)).unwrap();
    let layout = GridStart {
        lateral_jitter: 0.25,
        vertical_jitter: 0.25,
        ..GridStart::default()
    };
    let drones = grid_start(&form, &layout, 3);
    let targets = form.positions();
    let mut g = c.benchmark_group("optimal_assign_9x9");
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| optimal_assign_with(black_box(&targets), black_box(&drones), exec).unwrap())
        });
    }
    g.finish();
}

fn gradients(c: &mut Criterion) {
    let data = generate_synthetic_dataset(7, 0.01, 1);
    let model = LstmModel::new(FEATURES, &[64, 32], Emotion::COUNT, 0);
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut g = c.benchmark_group("batch_gradients_35x64x32");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| batch_gradients_with(&model, black_box(&data), &idx, exec).unwrap())
        });
    }
    g.finish();
}

fn scenario(c: &mut Criterion) {
    let skel = SkeletonConfig::default();
    let frame = t_pose(0.0);
    let form = skel.build(&frame).unwrap();
    let layout = GridStart {
        lateral_jitter: 0.25,
        vertical_jitter: 0.25,
        ..GridStart::default()
    };
    let init = grid_start(&form, &layout, 0);
    let cfg = SimConfig::default();
    let apf = ApfParams::default();
    let mut g = c.benchmark_group("scenario_10s");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_scenario_with(std::slice::from_ref(&frame), &skel, &cfg, &apf, &init, &[], exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, assignment, gradients, scenario);
criterion_main!(benches);
