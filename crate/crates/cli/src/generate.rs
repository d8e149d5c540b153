use std::path::PathBuf;

use anyhow::Result;
use mtsf::synthetic::{add_noise, gen_bandlimited, omega_to_csv};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::io;
use crate::model::ModelSpec;

#[derive(clap::Args)]
pub struct Args {
    #[command(flatten)]
    spec: ModelSpec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also draw a signal from the lowest `B` eigenvectors.
    #[arg(long, value_name = "B")]
    bandlimit: Option<usize>,
    /// Signal-to-noise ratio of the noisy signal.
    #[arg(long, default_value_t = 2.0)]
    snr: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Stats {
    n_nodes: usize,
    n_edges: usize,
    mean_degree: f64,
    max_degree: usize,
    block_sizes: Vec<usize>,
    eta: f64,
    weakly_inconsistent: bool,
    files: Vec<String>,
}

pub fn run(args: Args) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (skeleton, connection) = args.spec.instance(&mut rng)?;
    let mut files = vec![
        ("graph.txt", connection.graph.to_edge_list()),
        ("omega.csv", omega_to_csv(&connection.omega)),
    ];
    if let Some(b) = args.bandlimit {
        let truth = gen_bandlimited(&connection.graph, b, &mut rng)?;
        let noisy = add_noise(&truth, args.snr, &mut rng)?;
        files.push(("truth.csv", truth.to_csv()));
        files.push(("signal.csv", noisy.to_csv()));
    }
    let n_blocks = skeleton.labels.iter().max().map_or(0, |&b| b + 1);
    let mut block_sizes = vec![0; n_blocks];
    let mut labels = String::from("node,block\n");
    for (i, &b) in skeleton.labels.iter().enumerate() {
        block_sizes[b] += 1;
        labels.push_str(&format!("{i},{b}\n"));
    }
    files.push(("blocks.csv", labels));
    for (name, contents) in &files {
        io::write(&args.out.join(name), contents)?;
    }
    io::emit(&Stats {
        n_nodes: skeleton.n_nodes,
        n_edges: skeleton.edges.len(),
        mean_degree: skeleton.mean_degree(),
        max_degree: skeleton.max_degree(),
        block_sizes,
        eta: args.spec.eta_for(skeleton.n_nodes),
        weakly_inconsistent: connection.weakly_inconsistent,
        files: files.iter().map(|(name, _)| name.to_string()).collect(),
    })
}
