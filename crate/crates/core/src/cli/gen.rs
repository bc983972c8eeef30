use std::path::PathBuf;

use clap::{Args, ValueEnum};
use sublinopt::error::{Error, Result};
use sublinopt::gen::{
    gen_dense_unit, gen_game, gen_meb_hypercube, gen_meb_known, gen_planted_classification,
    gen_planted_row, gen_separable, Branch, Generated,
};

use super::output::{sidecar_path, to_json, write_file, GenReport, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// Unit rows with exact margin `--sigma`.
    Separable,
    /// YES/NO classification instances around margin `--tau`.
    Planted,
    /// Identical rows except possibly one planted row.
    PlantedRow,
    /// Hypercube vertices; `--special` adds the shifted vertex.
    MebHypercube,
    /// Points on a sphere of radius `--radius`.
    MebKnown,
    /// Uniform payoffs in [-1, 1].
    Game,
    /// Dense uniform unit rows.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Yes,
    No,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub family: Family,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub d: usize,
    #[arg(long, default_value_t = 0.3)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    /// Gap parameter of the planted family.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, value_enum, default_value = "yes")]
    pub branch: BranchArg,
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    #[arg(long, default_value_t = 0.3)]
    pub center_norm: f64,
    #[arg(long)]
    pub special: bool,
    #[arg(long, env = "SUBLINOPT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory; created if missing.
    #[arg(short = 'o', long = "out", default_value = ".")]
    pub out: PathBuf,
}

fn generate(a: &GenArgs) -> Result<Generated> {
    let branch = match a.branch {
        BranchArg::Yes => Branch::Yes,
        BranchArg::No => Branch::No,
    };
    match a.family {
        Family::Separable => gen_separable(a.n, a.d, a.sigma, a.seed),
        Family::Planted => gen_planted_classification(a.n, a.d, a.tau, a.eps, branch, a.seed),
        Family::PlantedRow => gen_planted_row(a.n, a.d, a.tau, branch, a.seed),
        Family::MebHypercube => gen_meb_hypercube(a.n, a.d, a.special, a.seed),
        Family::MebKnown => gen_meb_known(a.n, a.d, a.radius, a.center_norm, a.seed),
        Family::Game => gen_game(a.n, a.d, a.seed),
        Family::Dense => gen_dense_unit(a.n, a.d, a.seed),
    }
}

pub fn run(a: &GenArgs) -> Result<String> {
    let g = generate(a)?;
    std::fs::create_dir_all(&a.out).map_err(|source| Error::Io {
        path: a.out.clone(),
        source,
    })?;
    let stem = format!(
        "{}-n{}-d{}-s{}",
        g.meta.family, g.meta.n, g.meta.d, g.meta.seed
    );
    let instance = a.out.join(format!("{stem}.txt"));
    let metadata = sidecar_path(&instance);
    write_file(&instance, &g.matrix.to_instance_string())?;
    write_file(&metadata, &to_json(&g.meta))?;
    let report = GenReport {
        schema_version: SCHEMA_VERSION,
        instance,
        metadata,
        meta: g.meta,
    };
    Ok(to_json(&report))
}
