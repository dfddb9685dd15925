use criterion::{criterion_group, criterion_main, Criterion};

use mmw_manet::config::ScenarioConfig;
use mmw_manet::scenario::{run_cells, run_cells_sequential};

// Small grid: 3 protocols x 2 channels x 2 seeds, 20 nodes for 60 s.
const GRID: &str = r#"
[scenario]
duration_s = 60.0
warmup_s = 50.0
n_nodes = 20
replications = 2
"#;

fn grid(c: &mut Criterion) {
    let cells = ScenarioConfig::parse(GRID).unwrap().cells();
    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| run_cells_sequential(&cells).unwrap()));
    group.bench_function(
        if cfg!(feature = "parallel") {
            "rayon"
        } else {
            "fallback"
        },
        |b| b.iter(|| run_cells(&cells).unwrap()),
    );
    group.finish();
}

criterion_group!(benches, grid);
criterion_main!(benches);
