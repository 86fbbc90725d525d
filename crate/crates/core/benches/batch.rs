use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iotchat::batch::{self, Execution};
use iotchat::config::Config;
use iotchat::gateway::Gateway;
use iotchat::transcript;

const UTTERANCES: &[&str] = &[
    "Keep the living room temperature comfortable",
    "How much is my car charged?",
    "Turn the light on in the guest bedroom",
    "make it colder",
    "set the heating to 22 degrees",
    "lock the front door",
    "what is the status of the kettle",
    "I want to setup a new device",
    "xyzzy plugh",
    "help",
];

fn modes() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ]
}

fn understand(c: &mut Criterion) {
    let gateway = Gateway::from_config(&Config::shipped()).unwrap();
    let engine = gateway.engine();
    let contexts = engine.new_context_stack();
    let candidates = gateway.fabric().candidates("owner");
    let texts: Vec<String> = UTTERANCES
        .iter()
        .cycle()
        .take(2_000)
        .map(|s| s.to_string())
        .collect();
    let mut group = c.benchmark_group("understand_all");
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::new(name, texts.len()), |b| {
            b.iter(|| batch::understand_all(exec, engine, &texts, &contexts, &candidates))
        });
    }
    group.finish();
}

fn replay(c: &mut Criterion) {
    let config = Config::shipped();
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/transcripts");
    let one: Vec<_> = ["a", "b", "c", "d", "e"]
        .iter()
        .map(|n| transcript::parse_file(format!("{dir}/usecase_{n}.txt")).unwrap())
        .collect();
    let transcripts: Vec<_> = one.iter().cycle().take(40).cloned().collect();
    let mut group = c.benchmark_group("replay_all");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::new(name, transcripts.len()), |b| {
            b.iter(|| batch::replay_all(exec, &config, "owner", &transcripts))
        });
    }
    group.finish();
}

criterion_group!(benches, understand, replay);
criterion_main!(benches);
